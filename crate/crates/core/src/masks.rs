//! Per-frame binary-mask morphometry: connected components, centers of
//! mass, intersection (IS-) masks, PCA top points, and the Dice/DCM
//! segmentation metrics.

use crate::error::{Error, Result};
use crate::geometry::{pixel_to_patient, plane_intersection_line, SliceGeometry};
use crate::types::{Side, SliceLabel};

/// Minimal set-pixel count for the PCA top point (so 5% is at least 1 px).
pub const TOP_POINT_MIN_PIXELS: usize = 20;
/// Fraction of pixels kept along the principal axis for the top point.
pub const TOP_POINT_FRACTION: f64 = 0.05;

/// One binary raster mask with its frame index and timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMask {
    rows: usize,
    cols: usize,
    pixels: Vec<bool>,
    pub frame_index: usize,
    /// Seconds from the start of the series.
    pub time: f64,
    pub side: Side,
    pub slice_label: SliceLabel,
}

impl FrameMask {
    pub fn empty(rows: usize, cols: usize, side: Side, slice_label: SliceLabel) -> Self {
        Self {
            rows,
            cols,
            pixels: vec![false; rows * cols],
            frame_index: 0,
            time: 0.0,
            side,
            slice_label,
        }
    }

    pub fn from_pixels(
        rows: usize,
        cols: usize,
        set: impl IntoIterator<Item = (usize, usize)>,
        side: Side,
        slice_label: SliceLabel,
    ) -> Self {
        let mut m = Self::empty(rows, cols, side, slice_label);
        for (r, c) in set {
            m.set(r, c, true);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.pixels[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        self.pixels[r * self.cols + c] = v;
    }

    /// Number of set pixels.
    pub fn area(&self) -> usize {
        self.pixels.iter().filter(|&&p| p).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.pixels.iter().any(|&p| p)
    }

    /// Set pixels in row-major order.
    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let cols = self.cols;
        self.pixels
            .iter()
            .enumerate()
            .filter(|(_, &p)| p)
            .map(move |(idx, _)| (idx / cols, idx % cols))
    }

    pub fn raw_pixels(&self) -> &[bool] {
        &self.pixels
    }

    pub fn raw_pixels_mut(&mut self) -> &mut [bool] {
        &mut self.pixels
    }

    fn blank_like(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            pixels: vec![false; self.rows * self.cols],
            frame_index: self.frame_index,
            time: self.time,
            side: self.side,
            slice_label: self.slice_label,
        }
    }
}

/// Keeps the largest 8-connected component; ties go to the component whose
/// minimal (row, col) pixel is lexicographically smallest. Empty propagates.
pub fn largest_component(mask: &FrameMask) -> FrameMask {
    let (rows, cols) = (mask.rows, mask.cols);
    let mut labels = vec![usize::MAX; rows * cols];
    let mut best: Option<(usize, usize)> = None; // (label, area)
    let mut next_label = 0usize;
    let mut stack = Vec::new();

    for start in 0..rows * cols {
        if !mask.pixels[start] || labels[start] != usize::MAX {
            continue;
        }
        let label = next_label;
        next_label += 1;
        let mut area = 0usize;
        stack.push(start);
        labels[start] = label;
        while let Some(idx) = stack.pop() {
            area += 1;
            let (r, c) = (idx / cols, idx % cols);
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                    if nr < 0 || nc < 0 || nr >= rows as i64 || nc >= cols as i64 {
                        continue;
                    }
                    let nidx = nr as usize * cols + nc as usize;
                    if mask.pixels[nidx] && labels[nidx] == usize::MAX {
                        labels[nidx] = label;
                        stack.push(nidx);
                    }
                }
            }
        }
        // Row-major scan discovers each component at its lexicographically
        // smallest pixel, so a strict comparison implements the tie rule.
        if best.map_or(true, |(_, a)| area > a) {
            best = Some((label, area));
        }
    }

    let mut out = mask.blank_like();
    if let Some((label, _)) = best {
        for idx in 0..rows * cols {
            out.pixels[idx] = labels[idx] == label;
        }
    }
    out
}

/// Arithmetic mean of set-pixel coordinates, as sub-pixel (row, col).
pub fn center_of_mass(mask: &FrameMask) -> Result<(f64, f64)> {
    let mut n = 0usize;
    let (mut sr, mut sc) = (0.0f64, 0.0f64);
    for (r, c) in mask.iter_set() {
        sr += r as f64;
        sc += c as f64;
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    Ok((sr / n as f64, sc / n as f64))
}

/// Keeps only the set pixels whose patient-space centers lie within half the
/// other slice's thickness of the other slice's plane (the IS-mask).
pub fn intersection_mask(
    mask: &FrameMask,
    own: &SliceGeometry,
    other: &SliceGeometry,
) -> Result<FrameMask> {
    // Reject parallel slices up front.
    plane_intersection_line(own, other)?;
    let half = other.thickness * 0.5;
    let mut out = mask.blank_like();
    for (r, c) in mask.iter_set() {
        let pt = pixel_to_patient(own, (r as f64, c as f64))?;
        if other.signed_plane_distance(&pt).abs() <= half {
            out.set(r, c, true);
        }
    }
    Ok(out)
}

/// First principal axis of the set-pixel cloud, oriented along the hint.
fn principal_axis(pts: &[(f64, f64)], mean: (f64, f64), hint: (f64, f64)) -> (f64, f64) {
    let (mut srr, mut src, mut scc) = (0.0, 0.0, 0.0);
    for &(r, c) in pts {
        let dr = r - mean.0;
        let dc = c - mean.1;
        srr += dr * dr;
        src += dr * dc;
        scc += dc * dc;
    }
    let mut axis = if src.abs() < 1e-12 {
        if srr >= scc {
            (1.0, 0.0)
        } else {
            (0.0, 1.0)
        }
    } else {
        let tr = srr + scc;
        let det = srr * scc - src * src;
        let lambda = 0.5 * (tr + (tr * tr - 4.0 * det).max(0.0).sqrt());
        let v = (lambda - scc, src);
        let n = (v.0 * v.0 + v.1 * v.1).sqrt();
        (v.0 / n, v.1 / n)
    };
    let dot = axis.0 * hint.0 + axis.1 * hint.1;
    if dot < 0.0 || (dot == 0.0 && (axis.0 < 0.0 || (axis.0 == 0.0 && axis.1 < 0.0))) {
        axis = (-axis.0, -axis.1);
    }
    axis
}

/// The condyle's top point: PCA of the set pixels, first axis oriented
/// along `inferior_dir_px`, mean of the ceil(5% * N) pixels with the
/// smallest coordinate on that axis. Pixels tied with the cutoff
/// projection are all included so symmetric shapes stay unbiased.
pub fn top_point(mask: &FrameMask, inferior_dir_px: (f64, f64)) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = mask.iter_set().map(|(r, c)| (r as f64, c as f64)).collect();
    if pts.len() < TOP_POINT_MIN_PIXELS {
        return Err(Error::InsufficientMask {
            got: pts.len(),
            need: TOP_POINT_MIN_PIXELS,
        });
    }
    let mean = center_of_mass(mask)?;
    let axis = principal_axis(&pts, mean, inferior_dir_px);

    let mut projected: Vec<(f64, f64, f64)> = pts
        .iter()
        .map(|&(r, c)| ((r - mean.0) * axis.0 + (c - mean.1) * axis.1, r, c))
        .collect();
    projected.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let keep = ((TOP_POINT_FRACTION * pts.len() as f64).ceil() as usize).max(1);
    let cutoff = projected[keep - 1].0 + 1e-9;
    let (mut sr, mut sc) = (0.0, 0.0);
    let mut n = 0usize;
    for &(p, r, c) in &projected {
        if p > cutoff {
            break;
        }
        sr += r;
        sc += c;
        n += 1;
    }
    Ok((sr / n as f64, sc / n as f64))
}

/// Dice similarity coefficient; both masks empty is defined as 1.0.
pub fn dice(a: &FrameMask, b: &FrameMask) -> Result<f64> {
    if a.rows != b.rows || a.cols != b.cols {
        return Err(Error::InvalidArgument("mask dimensions differ".into()));
    }
    let mut inter = 0usize;
    let mut total = 0usize;
    for (pa, pb) in a.pixels.iter().zip(&b.pixels) {
        inter += (*pa && *pb) as usize;
        total += *pa as usize + *pb as usize;
    }
    if total == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / total as f64)
}

/// Patient-space distance in mm between the two masks' centers of mass.
pub fn dcm(a: &FrameMask, b: &FrameMask, geom: &SliceGeometry) -> Result<f64> {
    if a.rows != b.rows || a.cols != b.cols {
        return Err(Error::InvalidArgument("mask dimensions differ".into()));
    }
    let ca = center_of_mass(a)?;
    let cb = center_of_mass(b)?;
    let pa = pixel_to_patient(geom, ca)?;
    let pb = pixel_to_patient(geom, cb)?;
    Ok((pa - pb).norm())
}

/// Per-frame features extracted from one mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskFeatures {
    pub com_px: Option<(f64, f64)>,
    pub area_px: usize,
    pub is_com_px: Option<(f64, f64)>,
    pub top_px: Option<(f64, f64)>,
    pub coverage_ok: bool,
}

/// Extracts the features of one frame: largest component, its center of
/// mass, the IS-mask center (vs. `other`), and optionally the PCA top point.
pub fn extract_features(
    mask: &FrameMask,
    own: &SliceGeometry,
    other: Option<&SliceGeometry>,
    inferior_dir_px: Option<(f64, f64)>,
) -> Result<MaskFeatures> {
    let blob = largest_component(mask);
    if blob.is_empty() {
        return Ok(MaskFeatures {
            com_px: None,
            area_px: 0,
            is_com_px: None,
            top_px: None,
            coverage_ok: false,
        });
    }
    let com = center_of_mass(&blob)?;
    let (is_com, coverage_ok) = match other {
        Some(other) => {
            let is = intersection_mask(&blob, own, other)?;
            if is.is_empty() {
                (None, false)
            } else {
                (Some(center_of_mass(&is)?), true)
            }
        }
        None => (None, true),
    };
    let top = match inferior_dir_px {
        Some(hint) => top_point(&blob, hint).ok(),
        None => None,
    };
    Ok(MaskFeatures {
        com_px: Some(com),
        area_px: blob.area(),
        is_com_px: is_com,
        top_px: top,
        coverage_ok,
    })
}
