//! Synthetic ground-truth generator: parametric condylar motion, slice
//! sampling into masks, and injectable error sources (head drift, slab
//! tilt, per-cycle amplitude jitter) for oracle-based end-to-end tests.

use crate::error::{Error, Result};
use crate::geometry::{project_to_basis, AnatomicalBasis, PatientPoint, SliceGeometry};
use crate::masks::FrameMask;
use crate::phases::PhaseLabel;
use crate::types::{PerSide, Side, SliceLabel};
use nalgebra::{Rotation3, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Axial field of view, mm / matrix size.
pub const AXIAL_FOV_MM: f64 = 192.0;
pub const AXIAL_MATRIX: usize = 136;
pub const AXIAL_THICKNESS_MM: f64 = 8.0;
pub const AXIAL_FRAME_PERIOD_S: f64 = 0.0211;

/// Sagittal field of view, mm / matrix size.
pub const SAGITTAL_FOV_MM: f64 = 100.0;
pub const SAGITTAL_MATRIX: usize = 168;
pub const SAGITTAL_THICKNESS_MM: f64 = 6.0;
pub const SAGITTAL_FRAME_PERIOD_S: f64 = 0.0525;

fn default_rest() -> PerSide<[f64; 3]> {
    PerSide::new([30.0, 0.0, 0.0], [-30.0, 0.0, 0.0])
}

fn default_amplitude() -> PerSide<f64> {
    PerSide::new(14.0, 14.0)
}

/// All knobs of the synthetic subject. Serialized as the phantom spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomSpec {
    /// Closed-jaw condyle centers, patient mm (LPS).
    pub rest: PerSide<[f64; 3]>,
    /// Opening amplitude along the motion arc, mm per side.
    pub amplitude_mm: PerSide<f64>,
    /// Relative anterior (−y) and inferior (−z) components of the motion
    /// direction; normalized internally.
    pub anterior_weight: f64,
    pub inferior_weight: f64,
    /// Arc curvature 1/mm; 0 is a straight path.
    pub arc_curvature: f64,
    /// Jaw cycle period, seconds.
    pub period_s: f64,
    /// Fully closed dwell per cycle, seconds, split evenly around each
    /// period boundary; the motion arc compresses into the remainder.
    pub closed_dwell_s: f64,
    /// Recording length in cycles; fractional values truncate the recording.
    pub n_cycles: f64,
    /// Per-cycle amplitude jitter, uniform in ±fraction.
    pub jitter_frac: f64,
    /// Head drift, linear velocity mm/s in patient axes.
    pub drift_velocity_mm_s: [f64; 3],
    /// Head drift, rotation about the superior axis through the origin, deg/s.
    pub drift_rotation_deg_s: f64,
    /// Condyle ellipsoid semi-axes, mm per patient axis.
    pub ellipse_semi_axes_mm: [f64; 3],
    /// Axial slab tilt about the anterior axis, degrees; positive raises
    /// the left side of the slab.
    pub axial_tilt_deg: f64,
    /// Acquisition start offset of both sagittal series, seconds.
    pub sagittal_offset_s: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            rest: default_rest(),
            amplitude_mm: default_amplitude(),
            anterior_weight: 4.0,
            inferior_weight: 1.0,
            arc_curvature: 0.0,
            period_s: 6.0,
            closed_dwell_s: 0.0,
            n_cycles: 3.0,
            jitter_frac: 0.0,
            drift_velocity_mm_s: [0.0; 3],
            drift_rotation_deg_s: 0.0,
            ellipse_semi_axes_mm: [7.0, 5.0, 5.0],
            axial_tilt_deg: 0.0,
            sagittal_offset_s: 0.0,
            seed: 0,
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        for (_, &a) in self.amplitude_mm.iter() {
            if a < 0.0 {
                return Err(Error::InvalidArgument("amplitude must be ≥ 0".into()));
            }
        }
        if self.period_s <= 0.0 || self.n_cycles <= 0.0 {
            return Err(Error::InvalidArgument(
                "period and n_cycles must be positive".into(),
            ));
        }
        if self.closed_dwell_s < 0.0 || self.closed_dwell_s >= self.period_s {
            return Err(Error::InvalidArgument(
                "closed dwell must lie in [0, period)".into(),
            ));
        }
        if self.ellipse_semi_axes_mm.iter().any(|&a| a <= 0.0) {
            return Err(Error::InvalidArgument("ellipse axes must be positive".into()));
        }
        if self.anterior_weight.hypot(self.inferior_weight) <= 0.0 {
            return Err(Error::InvalidArgument(
                "motion direction weights are all zero".into(),
            ));
        }
        Ok(())
    }

    /// Recording length, seconds.
    pub fn duration(&self) -> f64 {
        self.n_cycles * self.period_s
    }
}

/// Centered axial slice, optionally tilted about the anterior axis through
/// the patient origin. Rows advance posterior, columns advance left.
pub fn axial_geometry(tilt_deg: f64) -> SliceGeometry {
    let spacing = AXIAL_FOV_MM / AXIAL_MATRIX as f64;
    let half = (AXIAL_MATRIX - 1) as f64 / 2.0 * spacing;
    // Negative angle about +y raises the left (+x) side of the plane.
    let rot = Rotation3::from_axis_angle(&Vector3::y_axis(), -tilt_deg.to_radians());
    SliceGeometry::new(
        rot * Vector3::new(-half, -half, 0.0),
        rot * Vector3::new(0.0, 1.0, 0.0),
        rot * Vector3::new(1.0, 0.0, 0.0),
        (spacing, spacing),
        AXIAL_MATRIX,
        AXIAL_MATRIX,
        AXIAL_THICKNESS_MM,
        AXIAL_FRAME_PERIOD_S,
        SliceLabel::Axial,
    )
    .expect("axial geometry constants are valid")
}

/// Sagittal slice through x = `x_mm`, centered on (y, z) = (0, 0).
/// Rows advance inferior, columns advance posterior.
pub fn sagittal_geometry(side: Side, x_mm: f64) -> SliceGeometry {
    let spacing = SAGITTAL_FOV_MM / SAGITTAL_MATRIX as f64;
    let half = (SAGITTAL_MATRIX - 1) as f64 / 2.0 * spacing;
    let label = match side {
        Side::Left => SliceLabel::SagittalLeft,
        Side::Right => SliceLabel::SagittalRight,
    };
    SliceGeometry::new(
        Vector3::new(x_mm, -half, half),
        Vector3::new(0.0, 0.0, -1.0),
        Vector3::new(0.0, 1.0, 0.0),
        (spacing, spacing),
        SAGITTAL_MATRIX,
        SAGITTAL_MATRIX,
        SAGITTAL_THICKNESS_MM,
        SAGITTAL_FRAME_PERIOD_S,
        label,
    )
    .expect("sagittal geometry constants are valid")
}

/// Ground-truth condyle paths sampled on a shared time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthSamples {
    pub times: Vec<f64>,
    pub positions: PerSide<Vec<PatientPoint>>,
    pub phases: Vec<PhaseLabel>,
}

/// Everything the pipeline ingests, generated in memory.
#[derive(Debug, Clone)]
pub struct PhantomDataset {
    pub axial_geom: SliceGeometry,
    pub sagittal_geoms: PerSide<SliceGeometry>,
    pub axial_times: Vec<f64>,
    pub sagittal_times: Vec<f64>,
    /// One axial mask per frame per condyle.
    pub axial_masks: PerSide<Vec<FrameMask>>,
    /// One mask per frame of each side's own sagittal slice.
    pub sagittal_masks: PerSide<Vec<FrameMask>>,
    pub truth: TruthSamples,
}

/// A validated spec plus its frozen per-cycle jitters.
#[derive(Debug, Clone)]
pub struct Phantom {
    pub spec: PhantomSpec,
    jitters: Vec<f64>,
}

impl Phantom {
    pub fn new(spec: PhantomSpec) -> Result<Self> {
        spec.validate()?;
        // Jitters cover every cycle any series can touch, so frame times
        // beyond the axial recording (sagittal offset) stay defined.
        let horizon = spec.sagittal_offset_s + spec.duration() + spec.period_s;
        let n = (horizon / spec.period_s).ceil() as usize + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let jitters = (0..n)
            .map(|_| {
                if spec.jitter_frac > 0.0 {
                    rng.gen_range(-spec.jitter_frac..=spec.jitter_frac)
                } else {
                    0.0
                }
            })
            .collect();
        Ok(Self { spec, jitters })
    }

    /// Fraction of full opening reached at time t, in [0, 1]; zero inside
    /// the closed dwell around each period boundary.
    fn profile(&self, t: f64) -> f64 {
        let period = self.spec.period_s;
        let u = t / period - (t / period).floor();
        let half = self.spec.closed_dwell_s / 2.0 / period;
        if u < half || u > 1.0 - half {
            return 0.0;
        }
        let active = (u - half) / (1.0 - 2.0 * half);
        (1.0 - (std::f64::consts::TAU * active).cos()) / 2.0
    }

    /// Arc length travelled along the opening path at time t.
    fn arc_position(&self, side: Side, t: f64) -> f64 {
        let period = self.spec.period_s;
        let cycle = ((t / period).floor().max(0.0) as usize).min(self.jitters.len() - 1);
        let amp = self.spec.amplitude_mm.get(side) * (1.0 + self.jitters[cycle]);
        amp * self.profile(t)
    }

    fn motion_dir(&self) -> PatientPoint {
        Vector3::new(
            0.0,
            -self.spec.anterior_weight,
            -self.spec.inferior_weight,
        )
        .normalize()
    }

    /// Condyle center at time t, including jaw motion and head drift.
    pub fn position(&self, side: Side, t: f64) -> PatientPoint {
        let rest: PatientPoint = Vector3::from(*self.spec.rest.get(side));
        let d0 = self.motion_dir();
        let s = self.arc_position(side, t);
        let body = if self.spec.arc_curvature.abs() < 1e-12 {
            rest + s * d0
        } else {
            // Circular arc of radius 1/curvature bending toward d1.
            let d1 = Vector3::x().cross(&d0);
            let r = 1.0 / self.spec.arc_curvature;
            rest + r * (s / r).sin() * d0 + r * (1.0 - (s / r).cos()) * d1
        };
        let rot = Rotation3::from_axis_angle(
            &Vector3::z_axis(),
            (self.spec.drift_rotation_deg_s * t).to_radians(),
        );
        rot * body + Vector3::from(self.spec.drift_velocity_mm_s) * t
    }

    /// Coarse phase of the motion template at time t.
    pub fn phase(&self, t: f64) -> PhaseLabel {
        let u = t / self.spec.period_s - (t / self.spec.period_s).floor();
        let s = self.profile(t);
        if s <= 0.05 {
            PhaseLabel::Closed
        } else if u < 0.5 {
            PhaseLabel::Opening
        } else {
            PhaseLabel::Closing
        }
    }

    /// Truth paths on a uniform grid of step `dt` over the axial recording.
    pub fn truth_samples(&self, dt: f64) -> TruthSamples {
        let n = (self.spec.duration() / dt).floor() as usize + 1;
        let times: Vec<f64> = (0..n).map(|f| f as f64 * dt).collect();
        TruthSamples {
            positions: PerSide::new(
                times.iter().map(|&t| self.position(Side::Left, t)).collect(),
                times.iter().map(|&t| self.position(Side::Right, t)).collect(),
            ),
            phases: times.iter().map(|&t| self.phase(t)).collect(),
            times,
        }
    }

    /// Rasterizes one condyle into one slice frame. The mask is the slab
    /// shadow of the ellipsoid: empty unless the center is within half a
    /// thickness of the plane, otherwise the in-plane projection of the
    /// ellipsoid by pixel-center inclusion.
    fn rasterize(&self, geom: &SliceGeometry, side: Side, t: f64, frame: usize) -> FrameMask {
        let mut mask = FrameMask::empty(geom.rows, geom.cols, side, geom.label);
        mask.frame_index = frame;
        mask.time = t;
        let center = self.position(side, t);
        if geom.signed_plane_distance(&center).abs() > geom.thickness * 0.5 {
            return mask;
        }
        let normal = geom.normal();
        let axes = self.spec.ellipse_semi_axes_mm;
        let ((r0, c0), _) = crate::geometry::patient_to_plane(geom, &center);
        let max_axis = axes.iter().cloned().fold(0.0, f64::max);
        let r_lo = ((r0 - max_axis / geom.pixel_spacing.0).floor().max(0.0)) as usize;
        let r_hi = ((r0 + max_axis / geom.pixel_spacing.0).ceil() as usize).min(geom.rows - 1);
        let c_lo = ((c0 - max_axis / geom.pixel_spacing.1).floor().max(0.0)) as usize;
        let c_hi = ((c0 + max_axis / geom.pixel_spacing.1).ceil() as usize).min(geom.cols - 1);
        for r in r_lo..=r_hi {
            for c in c_lo..=c_hi {
                let p = crate::geometry::pixel_to_patient(geom, (r as f64, c as f64))
                    .expect("pixel indices are in range");
                let d = p - center;
                let d_in = d - d.dot(&normal) * normal;
                let q = (d_in.x / axes[0]).powi(2)
                    + (d_in.y / axes[1]).powi(2)
                    + (d_in.z / axes[2]).powi(2);
                if q <= 1.0 {
                    mask.set(r, c, true);
                }
            }
        }
        mask
    }

    /// Renders the full three-slice dataset.
    pub fn render(&self) -> Result<PhantomDataset> {
        let axial_geom = axial_geometry(self.spec.axial_tilt_deg);
        let sagittal_geoms = PerSide::new(
            sagittal_geometry(Side::Left, self.spec.rest.left[0]),
            sagittal_geometry(Side::Right, self.spec.rest.right[0]),
        );
        let duration = self.spec.duration();
        let frame_times = |period: f64, offset: f64| -> Vec<f64> {
            let n = (duration / period).floor() as usize + 1;
            (0..n).map(|f| offset + f as f64 * period).collect()
        };
        let axial_times = frame_times(AXIAL_FRAME_PERIOD_S, 0.0);
        let sagittal_times = frame_times(SAGITTAL_FRAME_PERIOD_S, self.spec.sagittal_offset_s);

        let render_series = |geom: &SliceGeometry, side: Side, times: &[f64]| -> Vec<FrameMask> {
            times
                .iter()
                .enumerate()
                .map(|(f, &t)| self.rasterize(geom, side, t, f))
                .collect()
        };
        let axial_masks = PerSide::new(
            render_series(&axial_geom, Side::Left, &axial_times),
            render_series(&axial_geom, Side::Right, &axial_times),
        );
        let sagittal_masks = PerSide::new(
            render_series(&sagittal_geoms.left, Side::Left, &sagittal_times),
            render_series(&sagittal_geoms.right, Side::Right, &sagittal_times),
        );
        if Side::BOTH.iter().all(|&s| {
            axial_masks.get(s).iter().all(|m| m.is_empty())
                && sagittal_masks.get(s).iter().all(|m| m.is_empty())
        }) {
            return Err(Error::InvalidArgument(
                "phantom condyles never enter any field of view".into(),
            ));
        }
        Ok(PhantomDataset {
            axial_geom,
            sagittal_geoms,
            axial_times,
            sagittal_times,
            axial_masks,
            sagittal_masks,
            truth: self.truth_samples(AXIAL_FRAME_PERIOD_S),
        })
    }

    /// Anatomical basis of the truth at closed jaw: origin at the rest
    /// midpoint, i toward the left condyle.
    pub fn truth_basis(&self) -> AnatomicalBasis {
        let l: PatientPoint = Vector3::from(self.spec.rest.left);
        let r: PatientPoint = Vector3::from(self.spec.rest.right);
        let i = (l - r).normalize();
        let mut j = Vector3::new(0.0, -1.0, 0.0);
        j = (j - j.dot(&i) * i).normalize();
        let mut k = i.cross(&j);
        if k.z > 0.0 {
            k = -k;
            j = -j;
        }
        AnatomicalBasis {
            origin: 0.5 * (l + r),
            i,
            j,
            k,
        }
    }
}

/// Errors of an estimated trajectory against the truth, in mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthComparison {
    pub rmse_mm: f64,
    pub max_err_mm: f64,
    pub per_axis_rmse_mm: [f64; 3],
}

/// Compares an estimated trajectory to truth samples expressed in the given
/// anatomical basis; truth is linearly interpolated at the estimate's times.
/// j and k of the truth are zero-referenced at the estimate's first time to
/// match zero-referenced pipeline output.
pub fn compare_to_truth(
    est: &crate::assembly::Trajectory3D,
    truth: &TruthSamples,
    basis: &AnatomicalBasis,
) -> Result<TruthComparison> {
    if est.is_empty() {
        return Err(Error::InvalidArgument("empty estimate".into()));
    }
    let positions = truth.positions.get(est.side);
    let interp = |t: f64| -> Result<PatientPoint> {
        let (t0, t1) = (truth.times[0], *truth.times.last().unwrap());
        if t < t0 - 1e-9 || t > t1 + 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "estimate time {t:.3} s outside truth support [{t0:.3}, {t1:.3}]"
            )));
        }
        let idx = truth.times.partition_point(|&x| x < t).min(truth.times.len() - 1);
        if idx == 0 {
            return Ok(positions[0]);
        }
        let (ta, tb) = (truth.times[idx - 1], truth.times[idx]);
        let w = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
        Ok(positions[idx - 1] * (1.0 - w) + positions[idx] * w)
    };
    let first = interp(est.samples[0].time_s)?;
    let (_, j0, k0) = project_to_basis(basis, &first);
    let mut sq = [0.0f64; 3];
    let mut max_err = 0.0f64;
    for s in &est.samples {
        let (ti, tj, tk) = project_to_basis(basis, &interp(s.time_s)?);
        let e = [s.i_mm - ti, s.j_mm - (tj - j0), s.k_mm - (tk - k0)];
        for a in 0..3 {
            sq[a] += e[a] * e[a];
        }
        max_err = max_err.max((e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt());
    }
    let n = est.len() as f64;
    let per_axis = [(sq[0] / n).sqrt(), (sq[1] / n).sqrt(), (sq[2] / n).sqrt()];
    Ok(TruthComparison {
        rmse_mm: ((sq[0] + sq[1] + sq[2]) / n).sqrt(),
        max_err_mm: max_err,
        per_axis_rmse_mm: per_axis,
    })
}
