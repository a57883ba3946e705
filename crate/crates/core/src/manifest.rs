//! Dataset manifest: a TOML document describing the three slice series
//! (geometry plus per-frame masks as PGM files or inline run-length
//! records), and the binary PGM reader/writer.

use crate::error::{Error, Result};
use crate::geometry::SliceGeometry;
use crate::masks::FrameMask;
use crate::types::{PerSide, Side, SliceLabel};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// One slice series in the manifest. Masks come either as a list of PGM
/// files (paths relative to the manifest) or as inline run-length records:
/// row-major runs alternating zeros-first.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceBlock {
    pub origin: [f64; 3],
    pub row_dir: [f64; 3],
    pub col_dir: [f64; 3],
    /// (row, col) mm per pixel.
    pub pixel_spacing: [f64; 2],
    pub rows: usize,
    pub cols: usize,
    pub thickness: f64,
    pub frame_period: f64,
    /// Per-frame acquisition times; defaults to frame × frame_period.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamps: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub masks_left: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub masks_right: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rle_left: Option<Vec<Vec<u32>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rle_right: Option<Vec<Vec<u32>>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub subject: String,
    /// Closed-jaw reference frame of the axial series; autodetected when
    /// absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_frame: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axial: Option<SliceBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sagittal_left: Option<SliceBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sagittal_right: Option<SliceBlock>,
}

impl DatasetManifest {
    pub fn from_toml_str(text: &str, file: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            file: file.to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::Manifest(format!("serialize: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Writes a mask as a binary (P5) PGM with maxval 255.
pub fn write_pgm(path: &Path, mask: &FrameMask) -> Result<()> {
    let mut out = Vec::with_capacity(mask.rows() * mask.cols() + 32);
    write!(out, "P5\n{} {}\n255\n", mask.cols(), mask.rows())?;
    out.extend(mask.raw_pixels().iter().map(|&b| if b { 255u8 } else { 0 }));
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a binary (P5) PGM; any nonzero sample is a set pixel.
pub fn read_pgm(path: &Path, side: Side, label: SliceLabel) -> Result<FrameMask> {
    let data = std::fs::read(path)?;
    let parse_err = |message: &str| Error::Parse {
        file: path.display().to_string(),
        message: message.to_string(),
    };
    // Header: magic, width, height, maxval as whitespace-separated tokens,
    // with '#' comments running to end of line.
    let mut pos = 0usize;
    let mut token = |data: &[u8]| -> Result<String> {
        while pos < data.len() {
            match data[pos] {
                b'#' => {
                    while pos < data.len() && data[pos] != b'\n' {
                        pos += 1;
                    }
                }
                b' ' | b'\t' | b'\r' | b'\n' => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while pos < data.len() && !data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Parse {
                file: path.display().to_string(),
                message: "truncated header".into(),
            });
        }
        Ok(String::from_utf8_lossy(&data[start..pos]).into_owned())
    };
    if token(&data)? != "P5" {
        return Err(parse_err("not a binary PGM (expected magic P5)"));
    }
    let cols: usize = token(&data)?.parse().map_err(|_| parse_err("bad width"))?;
    let rows: usize = token(&data)?.parse().map_err(|_| parse_err("bad height"))?;
    let maxval: usize = token(&data)?.parse().map_err(|_| parse_err("bad maxval"))?;
    if maxval == 0 || maxval > 255 {
        return Err(parse_err("maxval must be 1..=255"));
    }
    pos += 1; // exactly one whitespace byte after maxval
    if data.len() < pos + rows * cols {
        return Err(parse_err("pixel data shorter than header promises"));
    }
    let mut mask = FrameMask::empty(rows, cols, side, label);
    for (i, &b) in data[pos..pos + rows * cols].iter().enumerate() {
        if b != 0 {
            mask.set(i / cols, i % cols, true);
        }
    }
    Ok(mask)
}

/// Row-major run-length encoding, zeros-first.
pub fn rle_encode(mask: &FrameMask) -> Vec<u32> {
    let mut runs = Vec::new();
    let mut current = false;
    let mut count: u32 = 0;
    for &b in mask.raw_pixels() {
        if b == current {
            count += 1;
        } else {
            runs.push(count);
            current = b;
            count = 1;
        }
    }
    runs.push(count);
    runs
}

pub fn rle_decode(
    runs: &[u32],
    rows: usize,
    cols: usize,
    side: Side,
    label: SliceLabel,
) -> Result<FrameMask> {
    let total: u64 = runs.iter().map(|&r| r as u64).sum();
    if total != (rows * cols) as u64 {
        return Err(Error::Manifest(format!(
            "run-length total {total} does not cover {rows}×{cols} pixels"
        )));
    }
    let mut mask = FrameMask::empty(rows, cols, side, label);
    let mut idx = 0usize;
    let mut value = false;
    for &run in runs {
        if value {
            for i in idx..idx + run as usize {
                mask.set(i / cols, i % cols, true);
            }
        }
        idx += run as usize;
        value = !value;
    }
    Ok(mask)
}

/// One slice series with geometry, frame times and per-side masks.
#[derive(Debug, Clone)]
pub struct LoadedSlice {
    pub geom: SliceGeometry,
    pub times: Vec<f64>,
    pub masks: PerSide<Option<Vec<FrameMask>>>,
}

/// A fully loaded and validated dataset.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub subject: String,
    pub closed_frame: Option<usize>,
    pub axial: LoadedSlice,
    pub sagittal: PerSide<Option<LoadedSlice>>,
}

fn load_side_masks(
    block: &SliceBlock,
    side: Side,
    label: SliceLabel,
    base: &Path,
) -> Result<Option<Vec<FrameMask>>> {
    let files = match side {
        Side::Left => &block.masks_left,
        Side::Right => &block.masks_right,
    };
    let rle = match side {
        Side::Left => &block.rle_left,
        Side::Right => &block.rle_right,
    };
    let mut masks = match (files, rle) {
        (Some(_), Some(_)) => {
            return Err(Error::Manifest(format!(
                "{label}: both mask files and run-length records given for the {side} side"
            )))
        }
        (Some(files), None) => files
            .iter()
            .map(|f| read_pgm(&base.join(f), side, label))
            .collect::<Result<Vec<_>>>()?,
        (None, Some(rle)) => rle
            .iter()
            .map(|runs| rle_decode(runs, block.rows, block.cols, side, label))
            .collect::<Result<Vec<_>>>()?,
        (None, None) => return Ok(None),
    };
    for (f, m) in masks.iter_mut().enumerate() {
        if m.rows() != block.rows || m.cols() != block.cols {
            return Err(Error::Manifest(format!(
                "{label} {side} frame {f}: mask is {}×{}, geometry says {}×{}",
                m.rows(),
                m.cols(),
                block.rows,
                block.cols
            )));
        }
        m.frame_index = f;
    }
    Ok(Some(masks))
}

fn load_slice(block: &SliceBlock, label: SliceLabel, base: &Path) -> Result<LoadedSlice> {
    let geom = SliceGeometry::new(
        Vector3::from(block.origin),
        Vector3::from(block.row_dir),
        Vector3::from(block.col_dir),
        (block.pixel_spacing[0], block.pixel_spacing[1]),
        block.rows,
        block.cols,
        block.thickness,
        block.frame_period,
        label,
    )?;
    let mut masks = PerSide::new(
        load_side_masks(block, Side::Left, label, base)?,
        load_side_masks(block, Side::Right, label, base)?,
    );
    let n_frames = masks
        .iter()
        .filter_map(|(_, m)| m.as_ref().map(Vec::len))
        .max()
        .unwrap_or(0);
    for (side, m) in [
        (Side::Left, masks.left.as_ref()),
        (Side::Right, masks.right.as_ref()),
    ] {
        if let Some(m) = m {
            if m.len() != n_frames {
                return Err(Error::Manifest(format!(
                    "{label}: {side} has {} frames, other side has {n_frames}",
                    m.len()
                )));
            }
        }
    }
    let times = match &block.timestamps {
        Some(ts) => {
            if ts.len() != n_frames {
                return Err(Error::Manifest(format!(
                    "{label}: {} timestamps for {n_frames} frames",
                    ts.len()
                )));
            }
            ts.clone()
        }
        None => (0..n_frames)
            .map(|f| f as f64 * block.frame_period)
            .collect(),
    };
    for (m, &t) in masks
        .left
        .iter_mut()
        .flatten()
        .chain(masks.right.iter_mut().flatten())
        .zip(times.iter().cycle())
    {
        m.time = t;
    }
    Ok(LoadedSlice { geom, times, masks })
}

/// Loads every referenced mask and validates the manifest against its
/// geometry; `manifest_path` anchors relative mask paths.
pub fn load_dataset(manifest: &DatasetManifest, manifest_path: &Path) -> Result<LoadedDataset> {
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let axial_block = manifest
        .axial
        .as_ref()
        .ok_or_else(|| Error::Manifest("manifest has no axial series".into()))?;
    let axial = load_slice(axial_block, SliceLabel::Axial, base)?;
    if axial.masks.left.is_none() || axial.masks.right.is_none() {
        return Err(Error::Manifest(
            "axial series needs masks for both condyles".into(),
        ));
    }
    let load_sag = |block: &Option<SliceBlock>, label: SliceLabel| -> Result<Option<LoadedSlice>> {
        block.as_ref().map(|b| load_slice(b, label, base)).transpose()
    };
    Ok(LoadedDataset {
        subject: manifest.subject.clone(),
        closed_frame: manifest.closed_frame,
        axial,
        sagittal: PerSide::new(
            load_sag(&manifest.sagittal_left, SliceLabel::SagittalLeft)?,
            load_sag(&manifest.sagittal_right, SliceLabel::SagittalRight)?,
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_mask(rng: &mut StdRng, rows: usize, cols: usize) -> FrameMask {
        let mut m = FrameMask::empty(rows, cols, Side::Left, SliceLabel::Axial);
        for r in 0..rows {
            for c in 0..cols {
                if rng.gen_bool(0.3) {
                    m.set(r, c, true);
                }
            }
        }
        m
    }

    #[test]
    fn pgm_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = StdRng::seed_from_u64(3);
        for i in 0..10 {
            let m = random_mask(&mut rng, 17, 23);
            let path = dir.path().join(format!("m{i}.pgm"));
            write_pgm(&path, &m).unwrap();
            let back = read_pgm(&path, Side::Left, SliceLabel::Axial).unwrap();
            assert_eq!(back.raw_pixels(), m.raw_pixels());
        }
    }

    #[test]
    fn pgm_reader_handles_comments() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.pgm");
        std::fs::write(&path, b"P5\n# a comment\n2 2\n255\n\xff\x00\x00\xff").unwrap();
        let m = read_pgm(&path, Side::Left, SliceLabel::Axial).unwrap();
        assert!(m.get(0, 0) && m.get(1, 1));
        assert!(!m.get(0, 1) && !m.get(1, 0));
    }

    #[test]
    fn pgm_reader_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pgm");
        std::fs::write(&path, b"P2\n2 2\n255\n0 0 0 0").unwrap();
        assert!(read_pgm(&path, Side::Left, SliceLabel::Axial).is_err());
        std::fs::write(&path, b"P5\n4 4\n255\nshort").unwrap();
        assert!(read_pgm(&path, Side::Left, SliceLabel::Axial).is_err());
    }

    #[test]
    fn rle_round_trip() {
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..20 {
            let m = random_mask(&mut rng, 11, 13);
            let runs = rle_encode(&m);
            let back = rle_decode(&runs, 11, 13, Side::Left, SliceLabel::Axial).unwrap();
            assert_eq!(back.raw_pixels(), m.raw_pixels());
        }
        // Zeros-first convention.
        let empty = FrameMask::empty(2, 2, Side::Left, SliceLabel::Axial);
        assert_eq!(rle_encode(&empty), vec![4]);
        assert!(rle_decode(&[3], 2, 2, Side::Left, SliceLabel::Axial).is_err());
    }

    fn block(rows: usize, cols: usize) -> SliceBlock {
        SliceBlock {
            origin: [0.0, 0.0, 0.0],
            row_dir: [0.0, 1.0, 0.0],
            col_dir: [1.0, 0.0, 0.0],
            pixel_spacing: [1.0, 1.0],
            rows,
            cols,
            thickness: 8.0,
            frame_period: 0.0211,
            ..Default::default()
        }
    }

    #[test]
    fn manifest_round_trip_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = StdRng::seed_from_u64(9);
        let m0 = random_mask(&mut rng, 4, 4);
        let m1 = random_mask(&mut rng, 4, 4);
        write_pgm(&dir.path().join("l0.pgm"), &m0).unwrap();
        write_pgm(&dir.path().join("l1.pgm"), &m1).unwrap();
        let mut axial = block(4, 4);
        axial.masks_left = Some(vec!["l0.pgm".into(), "l1.pgm".into()]);
        axial.rle_right = Some(vec![rle_encode(&m1), rle_encode(&m0)]);
        let manifest = DatasetManifest {
            subject: "s1".into(),
            closed_frame: Some(0),
            axial: Some(axial),
            sagittal_left: None,
            sagittal_right: None,
        };
        let path = dir.path().join("manifest.toml");
        manifest.save(&path).unwrap();
        let back = DatasetManifest::load(&path).unwrap();
        assert_eq!(back, manifest);

        let data = load_dataset(&back, &path).unwrap();
        assert_eq!(data.subject, "s1");
        let left = data.axial.masks.left.as_ref().unwrap();
        assert_eq!(left[0].raw_pixels(), m0.raw_pixels());
        assert_eq!(left[1].raw_pixels(), m1.raw_pixels());
        let right = data.axial.masks.right.as_ref().unwrap();
        assert_eq!(right[0].raw_pixels(), m1.raw_pixels());
        assert_eq!(data.axial.times, vec![0.0, 0.0211]);
        assert!(data.sagittal.left.is_none());
    }

    #[test]
    fn manifest_rejects_inconsistencies() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.toml");

        // Missing mask file.
        let mut axial = block(4, 4);
        axial.masks_left = Some(vec!["nope.pgm".into()]);
        axial.rle_right = Some(vec![vec![16]]);
        let manifest = DatasetManifest {
            subject: "s".into(),
            closed_frame: None,
            axial: Some(axial),
            sagittal_left: None,
            sagittal_right: None,
        };
        assert!(load_dataset(&manifest, &path).is_err());

        // Frame-count mismatch between sides.
        let mut axial = block(2, 2);
        axial.rle_left = Some(vec![vec![4], vec![4]]);
        axial.rle_right = Some(vec![vec![4]]);
        let manifest = DatasetManifest {
            subject: "s".into(),
            closed_frame: None,
            axial: Some(axial),
            sagittal_left: None,
            sagittal_right: None,
        };
        assert!(load_dataset(&manifest, &path).is_err());

        // No axial block at all.
        let manifest = DatasetManifest {
            subject: "s".into(),
            ..Default::default()
        };
        assert!(load_dataset(&manifest, &path).is_err());
    }
}
