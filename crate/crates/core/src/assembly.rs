//! Head-motion re-adjustment in the axial plane, fusion of axial and
//! sagittal channels into per-side 3D trajectories, zero-referencing, and
//! slab-coverage validation.

use crate::error::{Error, Result};
use crate::geometry::SliceGeometry;
use crate::masks::{intersection_mask, FrameMask};
use crate::phases::{label_at, MotionCycle, PhaseInterval, PhaseLabel};
use crate::series::ScalarSeries;
use crate::temporal::{apply_warp, smooth_spline, WarpPath};
use crate::types::{ExclusionReason, PerSide, Side};
use serde::{Deserialize, Serialize};

/// Per-frame 2D positions of one side in basis coordinates, mm.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarSeries {
    pub times: Vec<f64>,
    pub i: Vec<f64>,
    pub j: Vec<f64>,
}

impl PlanarSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn point(&self, frame: usize) -> (f64, f64) {
        (self.i[frame], self.j[frame])
    }
}

/// In-plane rigid transform: p ↦ R(angle) · (p + t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rigid2D {
    pub angle_rad: f64,
    pub pre_translation: (f64, f64),
}

impl Rigid2D {
    pub const IDENTITY: Rigid2D = Rigid2D {
        angle_rad: 0.0,
        pre_translation: (0.0, 0.0),
    };

    pub fn apply(&self, p: (f64, f64)) -> (f64, f64) {
        let (x, y) = (p.0 + self.pre_translation.0, p.1 + self.pre_translation.1);
        let (s, c) = self.angle_rad.sin_cos();
        (c * x - s * y, s * x + c * y)
    }
}

/// Mean of a series' values over a centered window, clamped to bounds.
fn window_mean_xy(series: &PlanarSeries, center: usize, window: usize) -> (f64, f64) {
    let half = window / 2;
    let lo = center.saturating_sub(half);
    let hi = (center + half).min(series.len() - 1);
    let n = (hi - lo + 1) as f64;
    (
        series.i[lo..=hi].iter().sum::<f64>() / n,
        series.j[lo..=hi].iter().sum::<f64>() / n,
    )
}

/// Re-adjusts an axial-plane series pair against head motion. The per-side
/// reference point is the mean of the closed positions at the cycle's start
/// and end; the transform translates the two-side midpoint to the origin and
/// rotates the right-to-left direction onto +i.
pub fn readjust_slice_frame(
    series: &PerSide<PlanarSeries>,
    cycle: &MotionCycle,
    window: usize,
) -> Result<(PerSide<PlanarSeries>, Rigid2D)> {
    let reference = |s: &PlanarSeries| -> (f64, f64) {
        let a = window_mean_xy(s, cycle.start_frame, window);
        let b = window_mean_xy(s, cycle.end_frame, window);
        (0.5 * (a.0 + b.0), 0.5 * (a.1 + b.1))
    };
    let rl = reference(&series.left);
    let rr = reference(&series.right);
    let d = ((rl.0 - rr.0).powi(2) + (rl.1 - rr.1).powi(2)).sqrt();
    if d < 1e-9 {
        return Err(Error::DegenerateGeometry(
            "coincident left/right reference points".into(),
        ));
    }
    let mid = (0.5 * (rl.0 + rr.0), 0.5 * (rl.1 + rr.1));
    // Angle of the right→left direction; rotating by its negative maps it
    // onto the +i axis.
    let angle = -((rl.1 - rr.1).atan2(rl.0 - rr.0));
    let transform = Rigid2D {
        angle_rad: angle,
        pre_translation: (-mid.0, -mid.1),
    };
    let adjusted = series.map(|s| {
        let mut out = s.clone();
        for f in 0..s.len() {
            let (x, y) = transform.apply(s.point(f));
            out.i[f] = x;
            out.j[f] = y;
        }
        out
    });
    Ok((adjusted, transform))
}

/// Which series fed each fused channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelProvenance {
    pub i_source: String,
    pub j_source: String,
    pub k_source: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub frame: usize,
    pub time_s: f64,
    pub i_mm: f64,
    pub j_mm: f64,
    pub k_mm: f64,
    /// Auxiliary superior-inferior channel tracking the condyle top point.
    pub k_top_mm: f64,
    pub phase: PhaseLabel,
    pub cycle_id: usize,
}

/// One side's fused trajectory over the selected cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory3D {
    pub side: Side,
    pub samples: Vec<TrajectorySample>,
    pub provenance: ChannelProvenance,
}

impl Trajectory3D {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn channel(&self, f: impl Fn(&TrajectorySample) -> f64) -> Vec<f64> {
        self.samples.iter().map(f).collect()
    }
}

/// Per-cycle channel inputs for one side. Axial series share the axial time
/// base; sagittal series share that side's sagittal time base.
#[derive(Debug, Clone)]
pub struct FuseInputs {
    pub axial_i: ScalarSeries,
    pub axial_j: ScalarSeries,
    pub sagittal_j: ScalarSeries,
    pub sagittal_k: ScalarSeries,
    pub sagittal_k_top: ScalarSeries,
}

/// Fuses one side's channels on the axial time base: i from the axial
/// plane, k from the warped sagittal plane, j as the mean of both planes.
/// Channels are spline-smoothed on a frame-index abscissa so the smoothing
/// parameter acts per frame rather than per second.
pub fn fuse_side(
    inputs: &FuseInputs,
    warp: &WarpPath,
    smoothing_p: f64,
    side: Side,
    cycle_id: usize,
    phases: &[PhaseInterval],
    frame_offset: usize,
) -> Result<Trajectory3D> {
    let n = inputs.axial_i.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty axial cycle".into()));
    }
    if inputs.axial_j.len() != n {
        return Err(Error::InvalidArgument("axial channel lengths differ".into()));
    }
    let sag_j = apply_warp(warp, &inputs.sagittal_j, n)?;
    let sag_k = apply_warp(warp, &inputs.sagittal_k, n)?;
    let sag_k_top = apply_warp(warp, &inputs.sagittal_k_top, n)?;

    let smooth = |values: &[f64]| -> Result<Vec<f64>> {
        if n < 4 {
            return Ok(values.to_vec());
        }
        let index_base = ScalarSeries::new(
            (0..n).map(|f| f as f64).collect(),
            values.to_vec(),
        )?;
        Ok(smooth_spline(&index_base, smoothing_p)?.values)
    };

    let i = smooth(&inputs.axial_i.values)?;
    let j_raw: Vec<f64> = inputs
        .axial_j
        .values
        .iter()
        .zip(&sag_j.values)
        .map(|(a, s)| 0.5 * (a + s))
        .collect();
    let j = smooth(&j_raw)?;
    let k = smooth(&sag_k.values)?;
    let k_top = smooth(&sag_k_top.values)?;

    let samples = (0..n)
        .map(|f| TrajectorySample {
            frame: frame_offset + f,
            time_s: inputs.axial_i.times[f],
            i_mm: i[f],
            j_mm: j[f],
            k_mm: k[f],
            k_top_mm: k_top[f],
            phase: label_at(phases, frame_offset + f),
            cycle_id,
        })
        .collect();
    Ok(Trajectory3D {
        side,
        samples,
        provenance: ChannelProvenance {
            i_source: "axial".into(),
            j_source: "axial+sagittal mean".into(),
            k_source: format!("sagittal_{side}"),
        },
    })
}

/// Subtracts the cycle-start j and k (and k_top) from every sample so both
/// condyles start at zero; i is untouched.
pub fn zero_reference(traj: &Trajectory3D) -> Trajectory3D {
    let Some(first) = traj.samples.first().copied() else {
        return traj.clone();
    };
    let mut out = traj.clone();
    for s in &mut out.samples {
        s.j_mm -= first.j_mm;
        s.k_mm -= first.k_mm;
        s.k_top_mm -= first.k_top_mm;
    }
    out
}

/// Fraction of frames with a non-empty sagittal mask whose mask intersects
/// the axial slab; empty frames are not evidence either way.
pub fn slab_coverage_fraction(
    masks: &[FrameMask],
    own: &SliceGeometry,
    axial: &SliceGeometry,
) -> Result<f64> {
    let mut seen = 0usize;
    let mut inside = 0usize;
    for m in masks {
        if m.is_empty() {
            continue;
        }
        seen += 1;
        if !intersection_mask(m, own, axial)?.is_empty() {
            inside += 1;
        }
    }
    if seen == 0 {
        return Ok(0.0);
    }
    Ok(inside as f64 / seen as f64)
}

/// Maps per-side slab coverage to the matching exclusion verdict, if any.
pub fn validate_coverage(
    masks: &PerSide<Vec<FrameMask>>,
    geoms: &PerSide<SliceGeometry>,
    axial: &SliceGeometry,
    threshold: f64,
) -> Result<Option<ExclusionReason>> {
    let left = slab_coverage_fraction(&masks.left, &geoms.left, axial)?;
    let right = slab_coverage_fraction(&masks.right, &geoms.right, axial)?;
    Ok(match (left < threshold, right < threshold) {
        (true, true) => Some(ExclusionReason::BothCondylesOutOfAxial),
        (true, false) => Some(ExclusionReason::LeftCondyleOutOfAxial),
        (false, true) => Some(ExclusionReason::RightCondyleOutOfAxial),
        (false, false) => None,
    })
}
