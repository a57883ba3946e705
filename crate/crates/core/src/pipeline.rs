//! End-to-end orchestration: masks → basis → channels → phases → cycle
//! pairing → warping → fusion → metrics, with subject-level exclusion
//! verdicts instead of hard failures where the quality table calls for them.

use crate::assembly::{
    fuse_side, readjust_slice_frame, validate_coverage, zero_reference, FuseInputs, PlanarSeries,
    Rigid2D, Trajectory3D,
};
use crate::config::{PipelineConfig, PointChoice};
use crate::error::{Error, Result};
use crate::geometry::{
    build_basis, pixel_to_patient, project_sagittal_to_basis, project_to_basis, sagittal_frames,
    AnatomicalBasis, PatientPoint, SagittalAxes, SliceGeometry,
};
use crate::manifest::{LoadedDataset, LoadedSlice};
use crate::masks::{extract_features, FrameMask, MaskFeatures};
use crate::metrics::{
    amplitude_ratio, delta_k_lr, init_final_distance, max_displacement, msd_open_close,
    SideQuality, SubjectQuality, FULL_OPENING_MM,
};
use crate::phantom::PhantomDataset;
use crate::phases::{
    best_match, detect_phases, extract_cycles, CyclePair, MotionCycle, PhaseInterval, PhaseParams,
};
use crate::series::{mean_series, ScalarSeries};
use crate::temporal::{adaptive_lowpass, dtw_align, median_filter, WarpPath};
use crate::types::{ExclusionReason, PerSide, Side, SliceLabel};

/// Everything one subject's run produces.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub subject: String,
    pub exclusion: Option<ExclusionReason>,
    /// Zero-referenced per-side trajectories over the selected cycle;
    /// axial-only runs carry k = 0.
    pub trajectories: Option<PerSide<Trajectory3D>>,
    pub phases: Vec<PhaseInterval>,
    pub pair: Option<CyclePair>,
    pub warp: Option<WarpPath>,
    pub axial_transform: Option<Rigid2D>,
    pub quality: SubjectQuality,
}

impl LoadedDataset {
    /// Wraps an in-memory phantom dataset as pipeline input.
    pub fn from_phantom(data: &PhantomDataset, subject: impl Into<String>) -> Self {
        let sag_slice = |side: Side| -> LoadedSlice {
            let masks = data.sagittal_masks.get(side).clone();
            LoadedSlice {
                geom: data.sagittal_geoms.get(side).clone(),
                times: data.sagittal_times.clone(),
                masks: match side {
                    Side::Left => PerSide::new(Some(masks), None),
                    Side::Right => PerSide::new(None, Some(masks)),
                },
            }
        };
        LoadedDataset {
            subject: subject.into(),
            closed_frame: None,
            axial: LoadedSlice {
                geom: data.axial_geom.clone(),
                times: data.axial_times.clone(),
                masks: PerSide::new(
                    Some(data.axial_masks.left.clone()),
                    Some(data.axial_masks.right.clone()),
                ),
            },
            sagittal: PerSide::new(Some(sag_slice(Side::Left)), Some(sag_slice(Side::Right))),
        }
    }
}

fn phase_params(config: &PipelineConfig) -> PhaseParams {
    PhaseParams {
        velocity_threshold_frac: config.velocity_threshold_frac,
        min_duration_s: config.min_phase_duration_s,
        closed_band_frac: config.closed_band_frac,
    }
}

/// Per-frame features of one side of one slice series.
fn series_features(
    masks: &[FrameMask],
    own: &SliceGeometry,
    other: Option<&SliceGeometry>,
    inferior_dir_px: Option<(f64, f64)>,
) -> Result<Vec<MaskFeatures>> {
    masks
        .iter()
        .map(|m| extract_features(m, own, other, inferior_dir_px))
        .collect()
}

fn com_position(geom: &SliceGeometry, px: Option<(f64, f64)>) -> Option<PatientPoint> {
    px.map(|rc| pixel_to_patient(geom, rc).expect("mass center is inside the image"))
}

/// Cleans one raw channel: gap interpolation, median filter, adaptive
/// low-pass.
fn clean_channel(raw: &ScalarSeries, config: &PipelineConfig) -> Result<ScalarSeries> {
    let mut s = raw.clone();
    s.interpolate_missing(config.missing_tolerance)?;
    let s = median_filter(&s, config.median_window)?;
    adaptive_lowpass(&s, config.lowpass_harmonics, config.min_period_s)
}

/// Finds the closed-jaw axial frame: the minimum of the median-filtered
/// mean anterior coordinate, measured in a provisional basis.
fn autodetect_closed_frame(
    positions: &PerSide<Vec<Option<PatientPoint>>>,
    times: &[f64],
    axial_geom: &SliceGeometry,
    config: &PipelineConfig,
) -> Result<usize> {
    let n = times.len();
    let first_both = (0..n)
        .find(|&f| positions.left[f].is_some() && positions.right[f].is_some())
        .ok_or_else(|| Error::Coverage("no axial frame shows both condyles".into()))?;
    let provisional = build_basis(
        &positions.left[first_both].unwrap(),
        &positions.right[first_both].unwrap(),
        axial_geom,
    )?;
    let values: Vec<f64> = (0..n)
        .map(|f| match (&positions.left[f], &positions.right[f]) {
            (Some(l), Some(r)) => {
                let (_, jl, _) = project_to_basis(&provisional, l);
                let (_, jr, _) = project_to_basis(&provisional, r);
                0.5 * (jl + jr)
            }
            _ => f64::NAN,
        })
        .collect();
    let mut series = ScalarSeries::new(times.to_vec(), values)?;
    // Detection only; gaps beyond the reporting tolerance still locate a
    // minimum.
    series.interpolate_missing(1.0)?;
    let filtered = median_filter(&series, config.median_window)?;
    Ok((0..n)
        .min_by(|&a, &b| filtered.values[a].partial_cmp(&filtered.values[b]).unwrap())
        .unwrap())
}

/// Nearest frame to `target` where both sides have a position.
fn nearest_frame_with_both(
    positions: &PerSide<Vec<Option<PatientPoint>>>,
    target: usize,
) -> Option<usize> {
    let n = positions.left.len();
    (0..n)
        .filter(|&f| positions.left[f].is_some() && positions.right[f].is_some())
        .min_by_key(|&f| f.abs_diff(target))
}

struct AxialChannels {
    /// Raw series keep NaN gaps for per-cycle coverage checks.
    raw_i: PerSide<ScalarSeries>,
    raw_j: PerSide<ScalarSeries>,
    i: PerSide<ScalarSeries>,
    j: PerSide<ScalarSeries>,
}

fn axial_channels(
    positions: &PerSide<Vec<Option<PatientPoint>>>,
    times: &[f64],
    basis: &AnatomicalBasis,
    config: &PipelineConfig,
) -> Result<AxialChannels> {
    let mut raw_i = PerSide::new(None, None);
    let mut raw_j = PerSide::new(None, None);
    for side in Side::BOTH {
        let mut vi = Vec::with_capacity(times.len());
        let mut vj = Vec::with_capacity(times.len());
        for p in positions.get(side) {
            match p {
                Some(p) => {
                    let (i, j, _) = project_to_basis(basis, p);
                    vi.push(i);
                    vj.push(j);
                }
                None => {
                    vi.push(f64::NAN);
                    vj.push(f64::NAN);
                }
            }
        }
        *raw_i.get_mut(side) = Some(ScalarSeries::new(times.to_vec(), vi)?);
        *raw_j.get_mut(side) = Some(ScalarSeries::new(times.to_vec(), vj)?);
    }
    let raw_i = PerSide::new(raw_i.left.unwrap(), raw_i.right.unwrap());
    let raw_j = PerSide::new(raw_j.left.unwrap(), raw_j.right.unwrap());
    let i = PerSide::new(
        clean_channel(&raw_i.left, config)?,
        clean_channel(&raw_i.right, config)?,
    );
    let j = PerSide::new(
        clean_channel(&raw_j.left, config)?,
        clean_channel(&raw_j.right, config)?,
    );
    Ok(AxialChannels { raw_i, raw_j, i, j })
}

struct SagittalChannels {
    raw_j: ScalarSeries,
    j: ScalarSeries,
    k: ScalarSeries,
    k_top: ScalarSeries,
}

fn sagittal_channels(
    features: &[MaskFeatures],
    times: &[f64],
    geom: &SliceGeometry,
    axes: &SagittalAxes,
    basis: &AnatomicalBasis,
    config: &PipelineConfig,
) -> Result<SagittalChannels> {
    let n = times.len();
    let mut vj = vec![f64::NAN; n];
    let mut vk = vec![f64::NAN; n];
    let mut vk_top = vec![f64::NAN; n];
    for (f, feat) in features.iter().enumerate() {
        // j tracks the IS-mask center; k the configured condyle point.
        if let Some(p) = com_position(geom, feat.is_com_px) {
            vj[f] = project_sagittal_to_basis(axes, basis, &p)?.0;
        }
        let com_k = com_position(geom, feat.com_px)
            .map(|p| project_sagittal_to_basis(axes, basis, &p))
            .transpose()?
            .map(|jk| jk.1);
        let top_k = com_position(geom, feat.top_px)
            .map(|p| project_sagittal_to_basis(axes, basis, &p))
            .transpose()?
            .map(|jk| jk.1);
        if let Some(t) = top_k.or(com_k) {
            vk_top[f] = t;
        }
        let main = match config.point {
            PointChoice::IsCom => com_k,
            PointChoice::Top => top_k.or(com_k),
        };
        if let Some(k) = main {
            vk[f] = k;
        }
    }
    let raw_j = ScalarSeries::new(times.to_vec(), vj)?;
    let j = clean_channel(&raw_j, config)?;
    let k = clean_channel(&ScalarSeries::new(times.to_vec(), vk)?, config)?;
    let k_top = clean_channel(&ScalarSeries::new(times.to_vec(), vk_top)?, config)?;
    Ok(SagittalChannels { raw_j, j, k, k_top })
}

/// Cycle boundaries from the two-side mean, per-side triples re-measured on
/// each side's own series.
fn cycles_with_sides(
    mean_j: &ScalarSeries,
    side_j: &PerSide<ScalarSeries>,
    phases: &[PhaseInterval],
    config: &PipelineConfig,
) -> Result<Vec<MotionCycle>> {
    let mut cycles = extract_cycles(mean_j, phases, Side::Left, config.triple_window)?;
    for c in &mut cycles {
        c.fill_side(Side::Left, &side_j.left, config.triple_window);
        c.fill_side(Side::Right, &side_j.right, config.triple_window);
    }
    Ok(cycles)
}

fn excluded_output(
    subject: &str,
    reason: ExclusionReason,
    phases: Vec<PhaseInterval>,
) -> PipelineOutput {
    PipelineOutput {
        subject: subject.to_string(),
        exclusion: Some(reason),
        trajectories: None,
        phases,
        pair: None,
        warp: None,
        axial_transform: None,
        quality: SubjectQuality::excluded(subject, reason),
    }
}

/// Mean over a centered window of values, clamped to the series.
fn window_mean(series: &ScalarSeries, center: usize, window: usize) -> f64 {
    let half = window / 2;
    let lo = center.saturating_sub(half);
    let hi = (center + half).min(series.len() - 1);
    series.values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
}

pub fn run_pipeline(
    data: &LoadedDataset,
    config: &PipelineConfig,
    force_axial_only: bool,
) -> Result<PipelineOutput> {
    config.validate()?;
    let axial_geom = &data.axial.geom;
    let sag_slices: PerSide<Option<&LoadedSlice>> = PerSide::new(
        data.sagittal.left.as_ref(),
        data.sagittal.right.as_ref(),
    );
    let sag_available = Side::BOTH.iter().all(|&s| {
        sag_slices
            .get(s)
            .map_or(false, |slice| slice.masks.get(s).is_some())
    });
    let axial_only = force_axial_only || !sag_available;

    // Per-frame axial features. IS-mask centers need the paired sagittal
    // geometry; axial-only mode falls back to plain mass centers.
    let axial_masks = PerSide::new(
        data.axial.masks.left.as_ref().ok_or_else(|| {
            Error::Manifest("axial series has no left-condyle masks".into())
        })?,
        data.axial.masks.right.as_ref().ok_or_else(|| {
            Error::Manifest("axial series has no right-condyle masks".into())
        })?,
    );
    let mut axial_positions: PerSide<Vec<Option<PatientPoint>>> =
        PerSide::new(Vec::new(), Vec::new());
    let mut com_positions: PerSide<Vec<Option<PatientPoint>>> =
        PerSide::new(Vec::new(), Vec::new());
    for side in Side::BOTH {
        let other = if axial_only {
            None
        } else {
            Some(&sag_slices.get(side).unwrap().geom)
        };
        let features = series_features(axial_masks.get(side), axial_geom, other, None)?;
        let coms: Vec<Option<PatientPoint>> = features
            .iter()
            .map(|f| com_position(axial_geom, f.com_px))
            .collect();
        let channel: Vec<Option<PatientPoint>> = if axial_only {
            coms.clone()
        } else {
            features
                .iter()
                .map(|f| com_position(axial_geom, f.is_com_px))
                .collect()
        };
        *com_positions.get_mut(side) = coms;
        *axial_positions.get_mut(side) = channel;
    }

    // Anatomical basis at the closed-jaw frame.
    let closed_frame = match data.closed_frame {
        Some(f) if f < data.axial.times.len() => f,
        Some(f) => {
            return Err(Error::Manifest(format!(
                "closed_frame {f} is beyond the {}-frame axial series",
                data.axial.times.len()
            )))
        }
        None => autodetect_closed_frame(&com_positions, &data.axial.times, axial_geom, config)?,
    };
    let basis_frame = nearest_frame_with_both(&axial_positions, closed_frame)
        .ok_or_else(|| Error::Coverage("no axial frame anchors the basis".into()))?;
    let basis = build_basis(
        &axial_positions.left[basis_frame].unwrap(),
        &axial_positions.right[basis_frame].unwrap(),
        axial_geom,
    )?;

    // Axial channels in the basis.
    let axial = axial_channels(&axial_positions, &data.axial.times, &basis, config)?;
    let axial_mean_j = mean_series(&axial.j.left, &axial.j.right)?;
    let params = phase_params(config);
    let phases = match detect_phases(&axial_mean_j, &params) {
        Ok(p) => p,
        Err(Error::NoMotion) => {
            return Ok(excluded_output(
                &data.subject,
                ExclusionReason::NoFullCycle,
                Vec::new(),
            ))
        }
        Err(e) => return Err(e),
    };
    let axial_cycles = match cycles_with_sides(&axial_mean_j, &axial.j, &phases, config) {
        Ok(c) => c,
        Err(Error::NoFullCycle) => {
            return Ok(excluded_output(
                &data.subject,
                ExclusionReason::NoFullCycle,
                phases,
            ))
        }
        Err(e) => return Err(e),
    };

    if axial_only {
        return run_axial_only(data, config, &axial, &axial_mean_j, phases, axial_cycles);
    }

    // Full mode: sagittal slab coverage gate.
    let sag_geoms = PerSide::new(
        sag_slices.left.unwrap().geom.clone(),
        sag_slices.right.unwrap().geom.clone(),
    );
    let sag_masks: PerSide<Vec<FrameMask>> = PerSide::new(
        sag_slices.left.unwrap().masks.left.clone().unwrap(),
        sag_slices.right.unwrap().masks.right.clone().unwrap(),
    );
    if let Some(reason) =
        validate_coverage(&sag_masks, &sag_geoms, axial_geom, config.coverage_threshold)?
    {
        return Ok(excluded_output(&data.subject, reason, phases));
    }

    let (axes_left, axes_right) =
        sagittal_frames(&basis, axial_geom, &sag_geoms.left, &sag_geoms.right)?;
    let axes = PerSide::new(axes_left, axes_right);
    if sag_slices.left.unwrap().times != sag_slices.right.unwrap().times {
        return Err(Error::Manifest(
            "left/right sagittal series have different time bases".into(),
        ));
    }
    let sag_times = &sag_slices.left.unwrap().times;

    let mut sag_channels: PerSide<Option<SagittalChannels>> = PerSide::new(None, None);
    for side in Side::BOTH {
        let geom = sag_geoms.get(side);
        // Top point hint: the basis inferior direction in pixel units.
        let inferior_px = (basis.k.dot(&geom.row_dir), basis.k.dot(&geom.col_dir));
        let features = series_features(sag_masks.get(side), geom, Some(axial_geom), Some(inferior_px))?;
        *sag_channels.get_mut(side) = Some(sagittal_channels(
            &features,
            sag_times,
            geom,
            axes.get(side),
            &basis,
            config,
        )?);
    }
    let sag_channels = PerSide::new(
        sag_channels.left.unwrap(),
        sag_channels.right.unwrap(),
    );

    // Sagittal phases and cycles on the two-side mean.
    let sag_mean_j = mean_series(&sag_channels.left.j, &sag_channels.right.j)?;
    let sag_j = PerSide::new(sag_channels.left.j.clone(), sag_channels.right.j.clone());
    let sag_result = detect_phases(&sag_mean_j, &params)
        .and_then(|p| cycles_with_sides(&sag_mean_j, &sag_j, &p, config));
    let sag_cycles = match sag_result {
        Ok(c) => c,
        Err(Error::NoMotion) | Err(Error::NoFullCycle) => {
            return Ok(excluded_output(
                &data.subject,
                ExclusionReason::NoFullCycle,
                phases,
            ))
        }
        Err(e) => return Err(e),
    };

    let pair = best_match(&axial_cycles, &sag_cycles)?;
    let (a_start, a_end) = (pair.axial.start_frame, pair.axial.end_frame);
    let (s_start, s_end) = (pair.sagittal.start_frame, pair.sagittal.end_frame);

    // Per-cycle gap budget, measured on the raw channels.
    for (name, raw, start, end) in [
        ("axial left i", &axial.raw_i.left, a_start, a_end),
        ("axial right i", &axial.raw_i.right, a_start, a_end),
        ("axial left j", &axial.raw_j.left, a_start, a_end),
        ("axial right j", &axial.raw_j.right, a_start, a_end),
        ("sagittal left j", &sag_channels.left.raw_j, s_start, s_end),
        ("sagittal right j", &sag_channels.right.raw_j, s_start, s_end),
    ] {
        let frac = raw.missing_fraction_in(start, end);
        if frac > config.missing_tolerance {
            return Err(Error::Coverage(format!(
                "{name}: {:.0}% of the selected cycle is missing (tolerance {:.0}%)",
                frac * 100.0,
                config.missing_tolerance * 100.0
            )));
        }
    }

    // Head-motion re-adjustment in the axial plane.
    let planar = PerSide::new(
        PlanarSeries {
            times: data.axial.times.clone(),
            i: axial.i.left.values.clone(),
            j: axial.j.left.values.clone(),
        },
        PlanarSeries {
            times: data.axial.times.clone(),
            i: axial.i.right.values.clone(),
            j: axial.j.right.values.clone(),
        },
    );
    let (adjusted, transform) =
        readjust_slice_frame(&planar, &pair.axial, config.triple_window)?;

    // Sagittal j re-centering against the same reference convention: the
    // mean of the windowed closed positions at the cycle's start and end.
    let centered_sag_j = sag_channels.map(|ch| {
        let reference = 0.5
            * (window_mean(&ch.j, s_start, config.triple_window)
                + window_mean(&ch.j, s_end, config.triple_window));
        ScalarSeries {
            times: ch.j.times.clone(),
            values: ch.j.values.iter().map(|v| v - reference).collect(),
        }
    });

    // One warp for both sides, computed on the IS-mask j means.
    let ref_j = axial_mean_j.slice(a_start, a_end);
    let query_j = mean_series(&centered_sag_j.left, &centered_sag_j.right)?
        .slice(s_start, s_end);
    let warp = dtw_align(&ref_j, &query_j)?;

    let mut trajectories: PerSide<Option<Trajectory3D>> = PerSide::new(None, None);
    for side in Side::BOTH {
        let adj = adjusted.get(side);
        let ch = sag_channels.get(side);
        let inputs = FuseInputs {
            axial_i: ScalarSeries::new(
                adj.times[a_start..=a_end].to_vec(),
                adj.i[a_start..=a_end].to_vec(),
            )?,
            axial_j: ScalarSeries::new(
                adj.times[a_start..=a_end].to_vec(),
                adj.j[a_start..=a_end].to_vec(),
            )?,
            sagittal_j: centered_sag_j.get(side).slice(s_start, s_end),
            sagittal_k: ch.k.slice(s_start, s_end),
            sagittal_k_top: ch.k_top.slice(s_start, s_end),
        };
        *trajectories.get_mut(side) = Some(fuse_side(
            &inputs,
            &warp,
            config.smoothing_p,
            side,
            pair.axial_index,
            &phases,
            a_start,
        )?);
    }
    let trajectories = PerSide::new(
        trajectories.left.unwrap(),
        trajectories.right.unwrap(),
    );

    // Δk before zero-referencing, everything else after.
    let delta_k = delta_k_lr(&trajectories.left, &trajectories.right)?;
    let zeroed = trajectories.map(zero_reference);

    let ratios = amplitude_ratio(&pair)?;
    let mut sides = PerSide::<SideQuality>::default();
    for side in Side::BOTH {
        *sides.get_mut(side) = SideQuality {
            ratio: *ratios.get(side),
            msd_mm: Some(msd_open_close(zeroed.get(side), config.msd_mode)?),
            d_init_fin_mm: Some(init_final_distance(zeroed.get(side))?),
        };
    }
    let displacement = Side::BOTH
        .iter()
        .map(|&s| max_displacement(zeroed.get(s)))
        .fold(0.0, f64::max);
    let quality = SubjectQuality {
        subject: data.subject.clone(),
        sides,
        delta_k_lr_mm: Some(delta_k),
        exclusion: None,
        max_displacement_mm: Some(displacement),
        displacement_ge_14mm: Some(displacement >= FULL_OPENING_MM),
        delta_k_flagged: Some(delta_k.abs() > config.delta_k_flag_mm),
    };
    Ok(PipelineOutput {
        subject: data.subject.clone(),
        exclusion: None,
        trajectories: Some(zeroed),
        phases,
        pair: Some(pair),
        warp: Some(warp),
        axial_transform: Some(transform),
        quality,
    })
}

/// Degraded 2D mode: axial trajectories over the first full cycle, carrying
/// the missing-simultaneity verdict.
fn run_axial_only(
    data: &LoadedDataset,
    config: &PipelineConfig,
    axial: &AxialChannels,
    _mean_j: &ScalarSeries,
    phases: Vec<PhaseInterval>,
    cycles: Vec<MotionCycle>,
) -> Result<PipelineOutput> {
    let cycle = cycles[0].clone();
    let planar = PerSide::new(
        PlanarSeries {
            times: data.axial.times.clone(),
            i: axial.i.left.values.clone(),
            j: axial.j.left.values.clone(),
        },
        PlanarSeries {
            times: data.axial.times.clone(),
            i: axial.i.right.values.clone(),
            j: axial.j.right.values.clone(),
        },
    );
    let (adjusted, transform) = readjust_slice_frame(&planar, &cycle, config.triple_window)?;
    let (start, end) = (cycle.start_frame, cycle.end_frame);
    let mut trajectories: PerSide<Option<Trajectory3D>> = PerSide::new(None, None);
    for side in Side::BOTH {
        let adj = adjusted.get(side);
        let n = end - start + 1;
        let flat = ScalarSeries::new(adj.times[start..=end].to_vec(), vec![0.0; n])?;
        let inputs = FuseInputs {
            axial_i: ScalarSeries::new(
                adj.times[start..=end].to_vec(),
                adj.i[start..=end].to_vec(),
            )?,
            axial_j: ScalarSeries::new(
                adj.times[start..=end].to_vec(),
                adj.j[start..=end].to_vec(),
            )?,
            sagittal_j: ScalarSeries::new(
                adj.times[start..=end].to_vec(),
                adj.j[start..=end].to_vec(),
            )?,
            sagittal_k: flat.clone(),
            sagittal_k_top: flat,
        };
        *trajectories.get_mut(side) = Some(fuse_side(
            &inputs,
            &WarpPath::diagonal(n),
            config.smoothing_p,
            side,
            0,
            &phases,
            start,
        )?);
    }
    let zeroed = PerSide::new(
        zero_reference(&trajectories.left.unwrap()),
        zero_reference(&trajectories.right.unwrap()),
    );
    Ok(PipelineOutput {
        subject: data.subject.clone(),
        exclusion: Some(ExclusionReason::NoSimultaneousSagittal),
        trajectories: Some(zeroed),
        phases,
        pair: None,
        warp: None,
        axial_transform: Some(transform),
        quality: SubjectQuality::excluded(
            &data.subject,
            ExclusionReason::NoSimultaneousSagittal,
        ),
    })
}

/// Convenience: label of the slice a given side's sagittal masks carry.
pub fn sagittal_label(side: Side) -> SliceLabel {
    match side {
        Side::Left => SliceLabel::SagittalLeft,
        Side::Right => SliceLabel::SagittalRight,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{compare_to_truth, Phantom, PhantomSpec};
    use approx::assert_relative_eq;

    fn run_phantom(spec: PhantomSpec) -> (Phantom, PipelineOutput) {
        let phantom = Phantom::new(spec).unwrap();
        let dataset = phantom.render().unwrap();
        let data = LoadedDataset::from_phantom(&dataset, "phantom");
        let out = run_pipeline(&data, &PipelineConfig::default(), false).unwrap();
        (phantom, out)
    }

    #[test]
    fn ideal_phantom_full_run() {
        let (phantom, out) = run_phantom(PhantomSpec::default());
        assert_eq!(out.exclusion, None);
        let trajs = out.trajectories.as_ref().unwrap();
        let truth = phantom.truth_samples(0.01);
        let basis = phantom.truth_basis();
        for side in Side::BOTH {
            let cmp = compare_to_truth(trajs.get(side), &truth, &basis).unwrap();
            assert!(
                cmp.per_axis_rmse_mm.iter().all(|&e| e < 0.5),
                "{side}: per-axis rmse {:?}",
                cmp.per_axis_rmse_mm
            );
            let q = out.quality.sides.get(side);
            assert!(q.msd_mm.unwrap() < 0.1, "msd {:?}", q.msd_mm);
            assert!((q.ratio.unwrap() - 1.0).abs() <= 0.05, "ratio {:?}", q.ratio);
        }
        let dk = out.quality.delta_k_lr_mm.unwrap();
        assert!(dk.abs() <= 0.5 * (100.0 / 168.0), "delta_k {dk}");
        let disp = out.quality.max_displacement_mm.unwrap();
        assert!((13.0..15.0).contains(&disp), "displacement {disp}");
    }

    #[test]
    fn fractional_cycle_is_excluded() {
        let spec = PhantomSpec {
            n_cycles: 0.5,
            ..Default::default()
        };
        let (_, out) = run_phantom(spec);
        assert_eq!(out.exclusion, Some(ExclusionReason::NoFullCycle));
        assert_eq!(out.quality.exclusion, Some(ExclusionReason::NoFullCycle));
        assert_eq!(out.quality.sides.left.ratio, None);
    }

    #[test]
    fn axial_only_mode_reports_missing_sagittal() {
        let phantom = Phantom::new(PhantomSpec::default()).unwrap();
        let dataset = phantom.render().unwrap();
        let mut data = LoadedDataset::from_phantom(&dataset, "phantom");
        data.sagittal.left = None;
        let out = run_pipeline(&data, &PipelineConfig::default(), false).unwrap();
        assert_eq!(out.exclusion, Some(ExclusionReason::NoSimultaneousSagittal));
        let trajs = out.trajectories.as_ref().unwrap();
        // 2D mode: k stays zero, j still shows the opening.
        for s in &trajs.left.samples {
            assert_relative_eq!(s.k_mm, 0.0, epsilon = 1e-9);
        }
        let max_j = trajs
            .left
            .samples
            .iter()
            .map(|s| s.j_mm)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(max_j > 10.0, "axial-only j peak {max_j}");
    }

    #[test]
    fn drifted_sagittal_acquisition_is_excluded() {
        // By the time the sagittal series starts, superior drift has moved
        // the condyles (5 mm semi-axis included) fully out of the 8 mm
        // axial slab: 90 s × 0.15 mm/s − 3.4 mm opening dip − 5 mm > 4 mm.
        let spec = PhantomSpec {
            sagittal_offset_s: 90.0,
            drift_velocity_mm_s: [0.0, 0.0, 0.15],
            ..Default::default()
        };
        let (_, out) = run_phantom(spec);
        assert_eq!(
            out.exclusion,
            Some(ExclusionReason::BothCondylesOutOfAxial)
        );
    }
}
