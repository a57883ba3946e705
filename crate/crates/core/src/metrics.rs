//! Trajectory quality metrics: mean-square distance between opening and
//! closing paths, per-plane amplitude ratio, initial-to-final closed-jaw
//! distance, left-right closed-jaw height difference, and the per-subject
//! quality table.

use crate::assembly::Trajectory3D;
use crate::error::{Error, Result};
use crate::phases::{CyclePair, PhaseLabel};
use crate::types::{ExclusionReason, PerSide, Side};
use serde::{Deserialize, Serialize};

/// How [`msd`] measures the distance from a point to the other sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MsdMode {
    /// Distance to the polyline through the other sequence (normative).
    Polyline,
    /// Distance to the nearest sample of the other sequence.
    PointSet,
}

fn dist<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Distance from `p` to the segment `a`..`b`.
fn point_segment_distance<const N: usize>(p: &[f64; N], a: &[f64; N], b: &[f64; N]) -> f64 {
    let mut ab2 = 0.0;
    let mut ap_ab = 0.0;
    for i in 0..N {
        let d = b[i] - a[i];
        ab2 += d * d;
        ap_ab += (p[i] - a[i]) * d;
    }
    if ab2 <= 0.0 {
        return dist(p, a);
    }
    let t = (ap_ab / ab2).clamp(0.0, 1.0);
    let mut closest = [0.0; N];
    for i in 0..N {
        closest[i] = a[i] + t * (b[i] - a[i]);
    }
    dist(p, &closest)
}

fn point_to_sequence<const N: usize>(p: &[f64; N], seq: &[[f64; N]], mode: MsdMode) -> f64 {
    match mode {
        MsdMode::PointSet => seq
            .iter()
            .map(|q| dist(p, q))
            .fold(f64::INFINITY, f64::min),
        MsdMode::Polyline => {
            if seq.len() == 1 {
                return dist(p, &seq[0]);
            }
            seq.windows(2)
                .map(|w| point_segment_distance(p, &w[0], &w[1]))
                .fold(f64::INFINITY, f64::min)
        }
    }
}

/// Symmetric mean of point-to-curve minima:
/// (Σᵢ min dist(uᵢ, V) + Σⱼ min dist(vⱼ, U)) / (n₁ + n₂).
pub fn msd<const N: usize>(u: &[[f64; N]], v: &[[f64; N]], mode: MsdMode) -> Result<f64> {
    if u.is_empty() || v.is_empty() {
        return Err(Error::InvalidArgument("msd needs non-empty sequences".into()));
    }
    let sum_u: f64 = u.iter().map(|p| point_to_sequence(p, v, mode)).sum();
    let sum_v: f64 = v.iter().map(|p| point_to_sequence(p, u, mode)).sum();
    Ok((sum_u + sum_v) / (u.len() + v.len()) as f64)
}

/// Splits a trajectory at its peak (max j) sample into the opening and
/// closing paths and returns their symmetric mean distance.
pub fn msd_open_close(traj: &Trajectory3D, mode: MsdMode) -> Result<f64> {
    if traj.len() < 3 {
        return Err(Error::InvalidArgument("trajectory too short for msd".into()));
    }
    let peak = (0..traj.len())
        .max_by(|&a, &b| {
            traj.samples[a]
                .j_mm
                .partial_cmp(&traj.samples[b].j_mm)
                .unwrap()
        })
        .unwrap();
    let to_pts = |range: std::ops::RangeInclusive<usize>| -> Vec<[f64; 3]> {
        traj.samples[range]
            .iter()
            .map(|s| [s.i_mm, s.j_mm, s.k_mm])
            .collect()
    };
    let opening = to_pts(0..=peak);
    let closing = to_pts(peak..=traj.len() - 1);
    msd(&opening, &closing, mode)
}

const MIN_SAGITTAL_AMPLITUDE_MM: f64 = 0.1;

/// A_AX / A_SAG per side of the matched cycle pair.
pub fn amplitude_ratio(pair: &CyclePair) -> Result<PerSide<Option<f64>>> {
    let mut out = PerSide::new(None, None);
    for side in Side::BOTH {
        if let (Some(ax), Some(sg)) = (
            pair.axial.sides.get(side),
            pair.sagittal.sides.get(side),
        ) {
            if sg.amplitude_mm <= MIN_SAGITTAL_AMPLITUDE_MM {
                return Err(Error::DegenerateAmplitude(format!(
                    "{side} sagittal amplitude {:.3} mm is below {MIN_SAGITTAL_AMPLITUDE_MM} mm",
                    sg.amplitude_mm
                )));
            }
            *out.get_mut(side) = Some(ax.amplitude_mm / sg.amplitude_mm);
        }
    }
    Ok(out)
}

fn closed_samples(traj: &Trajectory3D) -> Vec<usize> {
    (0..traj.len())
        .filter(|&f| traj.samples[f].phase == PhaseLabel::Closed)
        .collect()
}

/// 3D distance between the first and last closed-jaw samples.
pub fn init_final_distance(traj: &Trajectory3D) -> Result<f64> {
    let closed = closed_samples(traj);
    let (&first, &last) = match (closed.first(), closed.last()) {
        (Some(f), Some(l)) if f != l => (f, l),
        _ => return Err(Error::NoFullCycle),
    };
    let a = &traj.samples[first];
    let b = &traj.samples[last];
    Ok(dist(&[a.i_mm, a.j_mm, a.k_mm], &[b.i_mm, b.j_mm, b.k_mm]))
}

/// k_left − k_right at the closed-jaw cycle start. Must run before
/// zero-referencing, which nulls it by construction.
pub fn delta_k_lr(left: &Trajectory3D, right: &Trajectory3D) -> Result<f64> {
    let k_at_closed_start = |t: &Trajectory3D, side: Side| -> Result<f64> {
        let f = closed_samples(t)
            .first()
            .copied()
            .or_else(|| (!t.is_empty()).then_some(0))
            .ok_or_else(|| Error::Coverage(format!("{side} trajectory is empty")))?;
        Ok(t.samples[f].k_mm)
    };
    Ok(k_at_closed_start(left, Side::Left)? - k_at_closed_start(right, Side::Right)?)
}

/// Largest 3D excursion from the first sample.
pub fn max_displacement(traj: &Trajectory3D) -> f64 {
    let Some(first) = traj.samples.first() else {
        return 0.0;
    };
    let o = [first.i_mm, first.j_mm, first.k_mm];
    traj.samples
        .iter()
        .map(|s| dist(&[s.i_mm, s.j_mm, s.k_mm], &o))
        .fold(0.0, f64::max)
}

/// Displacement considered a full opening per the clinical norm, mm.
pub const FULL_OPENING_MM: f64 = 14.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SideQuality {
    pub ratio: Option<f64>,
    pub msd_mm: Option<f64>,
    pub d_init_fin_mm: Option<f64>,
}

/// One subject's quality row, mirroring the report table columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectQuality {
    pub subject: String,
    pub sides: PerSide<SideQuality>,
    pub delta_k_lr_mm: Option<f64>,
    pub exclusion: Option<ExclusionReason>,
    pub max_displacement_mm: Option<f64>,
    pub displacement_ge_14mm: Option<bool>,
    /// |Δk_L-R| exceeds the asymmetric slice-placement threshold.
    pub delta_k_flagged: Option<bool>,
}

impl SubjectQuality {
    /// Excluded subjects carry the reason and no metric values.
    pub fn excluded(subject: impl Into<String>, reason: ExclusionReason) -> Self {
        Self {
            subject: subject.into(),
            sides: PerSide::default(),
            delta_k_lr_mm: None,
            exclusion: Some(reason),
            max_displacement_mm: None,
            displacement_ge_14mm: None,
            delta_k_flagged: None,
        }
    }
}

/// Sorts rows by subject id for a deterministic report.
pub fn quality_report(mut rows: Vec<SubjectQuality>) -> Vec<SubjectQuality> {
    rows.sort_by(|a, b| a.subject.cmp(&b.subject));
    rows
}

/// Mean and range lines per metric over non-excluded rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

fn summarize(metric: &str, values: &[f64]) -> Option<MetricSummary> {
    if values.is_empty() {
        return None;
    }
    Some(MetricSummary {
        metric: metric.to_string(),
        mean: values.iter().sum::<f64>() / values.len() as f64,
        min: values.iter().cloned().fold(f64::INFINITY, f64::min),
        max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        n: values.len(),
    })
}

/// Cohort aggregates matching the report's summary paragraph: ratio, msd and
/// d over all sides, plus the mean of |Δk_L-R| per subject.
pub fn summarize_report(rows: &[SubjectQuality]) -> Vec<MetricSummary> {
    let mut ratios = Vec::new();
    let mut msds = Vec::new();
    let mut ds = Vec::new();
    let mut dks = Vec::new();
    for row in rows {
        if row.exclusion.is_some() {
            continue;
        }
        for (_, s) in row.sides.iter() {
            ratios.extend(s.ratio);
            msds.extend(s.msd_mm);
            ds.extend(s.d_init_fin_mm);
        }
        dks.extend(row.delta_k_lr_mm.map(f64::abs));
    }
    [
        summarize("ratio", &ratios),
        summarize("msd_mm", &msds),
        summarize("d_init_fin_mm", &ds),
        summarize("abs_delta_k_lr_mm", &dks),
    ]
    .into_iter()
    .flatten()
    .collect()
}
