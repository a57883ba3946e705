//! Patient-space slice geometry: pixel/patient mapping, plane intersections,
//! anatomical basis construction, and projections onto it.
//!
//! All 3D quantities use the DICOM LPS convention: x points right-to-left,
//! y anterior-to-posterior, z inferior-to-superior. Raster coordinates are
//! zero-based `(row, col)` with pixel centers at integer coordinates.

use crate::error::{Error, Result};
use crate::types::{Side, SliceLabel};
use nalgebra::Vector3;

/// Patient-space point or direction, in mm, LPS convention.
pub type PatientPoint = Vector3<f64>;

const UNIT_TOL: f64 = 1e-9;
/// Minimal sine of the angle between plane normals before two planes are
/// treated as parallel.
pub const PARALLEL_TOL: f64 = 1e-6;
/// Minimal separation between the two condyle mass centers.
pub const MIN_CENTER_SEPARATION_MM: f64 = 1.0;

/// Pose, raster and timing parameters of one MRI slice series.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceGeometry {
    pub origin: PatientPoint,
    pub row_dir: PatientPoint,
    pub col_dir: PatientPoint,
    /// (row, col) mm per pixel.
    pub pixel_spacing: (f64, f64),
    pub rows: usize,
    pub cols: usize,
    /// Slab thickness in mm.
    pub thickness: f64,
    /// Seconds per frame.
    pub frame_period: f64,
    pub label: SliceLabel,
}

impl SliceGeometry {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        origin: PatientPoint,
        row_dir: PatientPoint,
        col_dir: PatientPoint,
        pixel_spacing: (f64, f64),
        rows: usize,
        cols: usize,
        thickness: f64,
        frame_period: f64,
        label: SliceLabel,
    ) -> Result<Self> {
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite slice origin".into()));
        }
        if (row_dir.norm() - 1.0).abs() > UNIT_TOL || (col_dir.norm() - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidArgument(
                "slice direction cosines must be unit vectors".into(),
            ));
        }
        if row_dir.dot(&col_dir).abs() > UNIT_TOL {
            return Err(Error::InvalidArgument(
                "slice direction cosines must be orthogonal".into(),
            ));
        }
        if pixel_spacing.0 <= 0.0 || pixel_spacing.1 <= 0.0 {
            return Err(Error::InvalidArgument("pixel spacing must be > 0".into()));
        }
        if thickness <= 0.0 {
            return Err(Error::InvalidArgument("thickness must be > 0".into()));
        }
        if frame_period <= 0.0 {
            return Err(Error::InvalidArgument("frame period must be > 0".into()));
        }
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("raster dimensions must be > 0".into()));
        }
        Ok(Self {
            origin,
            row_dir,
            col_dir,
            pixel_spacing,
            rows,
            cols,
            thickness,
            frame_period,
            label,
        })
    }

    /// Unit plane normal, `row_dir x col_dir`.
    pub fn normal(&self) -> PatientPoint {
        self.row_dir.cross(&self.col_dir)
    }

    /// Signed distance from `pt` to the slice plane, along the normal.
    pub fn signed_plane_distance(&self, pt: &PatientPoint) -> f64 {
        (pt - self.origin).dot(&self.normal())
    }
}

/// Maps a sub-pixel raster coordinate `(row, col)` to patient space.
/// Extrapolation outside the raster is allowed.
pub fn pixel_to_patient(geom: &SliceGeometry, rc: (f64, f64)) -> Result<PatientPoint> {
    if !rc.0.is_finite() || !rc.1.is_finite() {
        return Err(Error::InvalidArgument("non-finite raster coordinate".into()));
    }
    Ok(geom.origin
        + geom.row_dir * (rc.0 * geom.pixel_spacing.0)
        + geom.col_dir * (rc.1 * geom.pixel_spacing.1))
}

/// Inverse of [`pixel_to_patient`]: the in-plane raster coordinate plus the
/// signed off-plane distance in mm.
pub fn patient_to_plane(geom: &SliceGeometry, pt: &PatientPoint) -> ((f64, f64), f64) {
    let d = pt - geom.origin;
    let rc = (
        d.dot(&geom.row_dir) / geom.pixel_spacing.0,
        d.dot(&geom.col_dir) / geom.pixel_spacing.1,
    );
    (rc, d.dot(&geom.normal()))
}

/// Intersection line of two slice planes as (point, unit direction).
pub fn plane_intersection_line(
    a: &SliceGeometry,
    b: &SliceGeometry,
) -> Result<(PatientPoint, PatientPoint)> {
    let na = a.normal();
    let nb = b.normal();
    let dir = na.cross(&nb);
    if dir.norm() <= PARALLEL_TOL {
        return Err(Error::DegenerateGeometry("parallel slice planes".into()));
    }
    let dir = dir.normalize();
    // Minimum-norm point satisfying both plane equations: solve the 2x2
    // normal equations of [na; nb] x = [da; db].
    let da = na.dot(&a.origin);
    let db = nb.dot(&b.origin);
    let g = na.dot(&nb);
    let det = 1.0 - g * g;
    let ca = (da - g * db) / det;
    let cb = (db - g * da) / det;
    let point = na * ca + nb * cb;
    Ok((point, dir))
}

/// Anatomical coordinate frame built from the two condyle mass centers in
/// the axial slice at closed jaw.
#[derive(Debug, Clone, PartialEq)]
pub struct AnatomicalBasis {
    /// Midpoint of the two mass centers.
    pub origin: PatientPoint,
    /// Unit right-to-left direction through the mass centers.
    pub i: PatientPoint,
    /// In the axial plane, perpendicular to `i`, posterior-to-anterior.
    pub j: PatientPoint,
    /// Perpendicular to both, superior-to-inferior.
    pub k: PatientPoint,
}

/// Constructs the anatomical basis from the left/right mass centers and the
/// axial slice geometry.
pub fn build_basis(
    left_center: &PatientPoint,
    right_center: &PatientPoint,
    axial: &SliceGeometry,
) -> Result<AnatomicalBasis> {
    let sep = left_center - right_center;
    if sep.norm() <= MIN_CENTER_SEPARATION_MM {
        return Err(Error::DegenerateGeometry(
            "condyle mass centers are coincident".into(),
        ));
    }
    for (side, c) in [("left", left_center), ("right", right_center)] {
        let off = axial.signed_plane_distance(c).abs();
        if off > axial.thickness {
            return Err(Error::Coverage(format!(
                "{side} mass center is {off:.2} mm off the axial plane (thickness {:.2} mm)",
                axial.thickness
            )));
        }
    }
    let origin = (left_center + right_center) * 0.5;
    let i = sep.normalize();
    let n = axial.normal();
    let mut j = n.cross(&i);
    let jn = j.norm();
    if jn <= PARALLEL_TOL {
        return Err(Error::DegenerateGeometry(
            "center line is normal to the axial plane".into(),
        ));
    }
    j /= jn;
    // Anterior is -y in LPS.
    if j.y > 0.0 {
        j = -j;
    }
    let mut k = i.cross(&j);
    // Inferior is -z in LPS.
    if k.z > 0.0 {
        k = -k;
    }
    Ok(AnatomicalBasis { origin, i, j, k })
}

/// Per-slice projection frame of one sagittal slice: the point where the
/// `i` axis pierces the plane, the in-plane axes, and the obliquity angles.
#[derive(Debug, Clone, PartialEq)]
pub struct SagittalAxes {
    pub side: Side,
    /// Intersection of the line `O + t*i` with the sagittal plane (p or q).
    pub origin_point: PatientPoint,
    /// Unit intersection direction of the sagittal and axial planes,
    /// oriented along the basis `j`.
    pub j_dir: PatientPoint,
    /// In-plane direction perpendicular to `j_dir`, oriented along `k`.
    pub k_dir: PatientPoint,
    /// Angle between `j_dir` and the basis `j`, radians (alpha/beta).
    pub in_plane_angle: f64,
    /// Angle between `k_dir` and the basis `k`, radians (theta/phi).
    pub out_plane_angle: f64,
    /// Unit normal of the sagittal plane.
    pub plane_normal: PatientPoint,
    /// Slab thickness of the sagittal slice, mm.
    pub thickness: f64,
}

fn sagittal_frame_one(
    basis: &AnatomicalBasis,
    axial_normal: &PatientPoint,
    sag: &SliceGeometry,
    side: Side,
) -> Result<SagittalAxes> {
    let ns = sag.normal();
    let denom = basis.i.dot(&ns);
    if denom.abs() <= PARALLEL_TOL {
        return Err(Error::Coverage(format!(
            "axis i is parallel to the {side} sagittal plane"
        )));
    }
    let t = (sag.origin - basis.origin).dot(&ns) / denom;
    let origin_point = basis.origin + basis.i * t;

    let mut j_dir = ns.cross(axial_normal);
    let jn = j_dir.norm();
    if jn <= PARALLEL_TOL {
        return Err(Error::DegenerateGeometry(
            "sagittal plane is parallel to the axial plane".into(),
        ));
    }
    j_dir /= jn;
    if j_dir.dot(&basis.j) < 0.0 {
        j_dir = -j_dir;
    }
    let mut k_dir = ns.cross(&j_dir).normalize();
    if k_dir.dot(&basis.k) < 0.0 {
        k_dir = -k_dir;
    }
    let in_plane_angle = j_dir.dot(&basis.j).clamp(-1.0, 1.0).acos();
    let out_plane_angle = k_dir.dot(&basis.k).clamp(-1.0, 1.0).acos();
    Ok(SagittalAxes {
        side,
        origin_point,
        j_dir,
        k_dir,
        in_plane_angle,
        out_plane_angle,
        plane_normal: ns.normalize(),
        thickness: sag.thickness,
    })
}

/// Builds the left and right sagittal projection frames (p/q, the in-plane
/// axes, and the obliquity angles).
pub fn sagittal_frames(
    basis: &AnatomicalBasis,
    axial: &SliceGeometry,
    sag_left: &SliceGeometry,
    sag_right: &SliceGeometry,
) -> Result<(SagittalAxes, SagittalAxes)> {
    let n_ax = axial.normal();
    let left = sagittal_frame_one(basis, &n_ax, sag_left, Side::Left)?;
    let right = sagittal_frame_one(basis, &n_ax, sag_right, Side::Right)?;
    Ok((left, right))
}

/// Coordinates of `pt` in the anatomical basis: `((pt-O)·i, (pt-O)·j, (pt-O)·k)`.
pub fn project_to_basis(basis: &AnatomicalBasis, pt: &PatientPoint) -> (f64, f64, f64) {
    let d = pt - basis.origin;
    (d.dot(&basis.i), d.dot(&basis.j), d.dot(&basis.k))
}

/// (j, k) coordinates of an in-plane sagittal point relative to the slice's
/// origin point (p or q), by direct dot products with the basis axes.
pub fn project_sagittal_to_basis(
    axes: &SagittalAxes,
    basis: &AnatomicalBasis,
    pt: &PatientPoint,
) -> Result<(f64, f64)> {
    let d = pt - axes.origin_point;
    let off = d.dot(&axes.plane_normal).abs();
    if off > axes.thickness * 0.5 {
        return Err(Error::Coverage(format!(
            "point is {off:.3} mm off the sagittal plane (slab half-width {:.3} mm)",
            axes.thickness * 0.5
        )));
    }
    Ok((d.dot(&basis.j), d.dot(&basis.k)))
}

/// Same projection through the obliquity-angle route: decompose on
/// `(j_dir, k_dir)` and map to the basis using the stored angles. Kept as a
/// cross-check of the vector route; the two must agree for in-plane points.
pub fn project_sagittal_via_angles(
    axes: &SagittalAxes,
    basis: &AnatomicalBasis,
    pt: &PatientPoint,
) -> (f64, f64) {
    let d = pt - axes.origin_point;
    let a = d.dot(&axes.j_dir);
    let b = d.dot(&axes.k_dir);
    let j = a * axes.in_plane_angle.cos() + b * axes.k_dir.dot(&basis.j);
    let k = b * axes.out_plane_angle.cos() + a * axes.j_dir.dot(&basis.k);
    (j, k)
}
