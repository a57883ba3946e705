//! Deterministic output formatting: fixed 6-significant-digit floats, the
//! version/config header line, and the CSV serializers/parsers for
//! trajectories, phases, warps, transforms and the quality table.

use crate::assembly::{Rigid2D, Trajectory3D};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::metrics::{MetricSummary, SideQuality, SubjectQuality};
use crate::phases::PhaseInterval;
use crate::phantom::TruthSamples;
use crate::temporal::WarpPath;
use crate::types::{ExclusionReason, PerSide, Side};

/// Fixed decimal rendering with 6 significant digits; reruns must be
/// byte-identical, so this is the only float formatter used in outputs.
pub fn fmt6(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if v.is_nan() {
        return "nan".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let mag = v.abs().log10().floor() as i32;
    let decimals = (5 - mag).max(0) as usize;
    format!("{v:.decimals$}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt6).unwrap_or_default()
}

/// Header comment carried by every output file.
pub fn header_line(config: &PipelineConfig) -> String {
    format!(
        "# condylar {} config_sha256={}",
        env!("CARGO_PKG_VERSION"),
        config.sha256()
    )
}

pub fn trajectory_csv(trajectories: &[&Trajectory3D], header: &str) -> String {
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    out.push_str("frame,time_s,side,i_mm,j_mm,k_mm,k_top_mm,phase,cycle_id\n");
    for t in trajectories {
        for s in &t.samples {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                s.frame,
                fmt6(s.time_s),
                t.side,
                fmt6(s.i_mm),
                fmt6(s.j_mm),
                fmt6(s.k_mm),
                fmt6(s.k_top_mm),
                s.phase,
                s.cycle_id
            ));
        }
    }
    out
}

pub fn phases_csv(phases: &[PhaseInterval], header: &str) -> String {
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    out.push_str("start_frame,end_frame,label\n");
    for p in phases {
        out.push_str(&format!("{},{},{}\n", p.start, p.end, p.label));
    }
    out
}

pub fn warp_csv(path: &WarpPath, header: &str) -> String {
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    out.push_str(&format!("# cost={}\n", fmt6(path.cost)));
    out.push_str("ref_index,query_index\n");
    for &(r, q) in &path.pairs {
        out.push_str(&format!("{r},{q}\n"));
    }
    out
}

pub fn transforms_csv(axial: &Rigid2D, header: &str) -> String {
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    out.push_str("slice,angle_rad,ti_mm,tj_mm\n");
    out.push_str(&format!(
        "axial,{},{},{}\n",
        fmt6(axial.angle_rad),
        fmt6(axial.pre_translation.0),
        fmt6(axial.pre_translation.1)
    ));
    out
}

pub fn truth_csv(truth: &TruthSamples, header: &str) -> String {
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    out.push_str("time_s,side,x_mm,y_mm,z_mm\n");
    for side in Side::BOTH {
        for (t, p) in truth.times.iter().zip(truth.positions.get(side)) {
            out.push_str(&format!(
                "{},{side},{},{},{}\n",
                fmt6(*t),
                fmt6(p.x),
                fmt6(p.y),
                fmt6(p.z)
            ));
        }
    }
    out
}

pub const QUALITY_COLUMNS: &str =
    "subject,side,ratio,msd_mm,d_init_fin_mm,delta_k_lr_mm,excluded_reason,displacement_mm,ge_14mm";

pub fn quality_csv(rows: &[SubjectQuality], header: &str) -> String {
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    out.push_str(QUALITY_COLUMNS);
    out.push('\n');
    for row in rows {
        for side in Side::BOTH {
            let s = row.sides.get(side);
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                row.subject,
                side,
                fmt_opt(s.ratio),
                fmt_opt(s.msd_mm),
                fmt_opt(s.d_init_fin_mm),
                fmt_opt(row.delta_k_lr_mm),
                row.exclusion.map(|e| e.to_string()).unwrap_or_default(),
                fmt_opt(row.max_displacement_mm),
                row.displacement_ge_14mm
                    .map(|b| b.to_string())
                    .unwrap_or_default()
            ));
        }
    }
    out
}

fn exclusion_from_str(text: &str) -> Result<Option<ExclusionReason>> {
    if text.is_empty() {
        return Ok(None);
    }
    for reason in [
        ExclusionReason::NoSimultaneousSagittal,
        ExclusionReason::NoFullCycle,
        ExclusionReason::BothCondylesOutOfAxial,
        ExclusionReason::LeftCondyleOutOfAxial,
        ExclusionReason::RightCondyleOutOfAxial,
    ] {
        if reason.to_string() == text {
            return Ok(Some(reason));
        }
    }
    Err(Error::Parse {
        file: "<quality csv>".into(),
        message: format!("unknown exclusion reason: {text}"),
    })
}

/// Parses a quality CSV back into subject rows (inverse of [`quality_csv`]).
pub fn parse_quality_csv(text: &str, file: &str) -> Result<Vec<SubjectQuality>> {
    let err = |message: String| Error::Parse {
        file: file.to_string(),
        message,
    };
    let parse_opt = |field: &str, line: usize| -> Result<Option<f64>> {
        if field.is_empty() {
            return Ok(None);
        }
        field
            .parse()
            .map(Some)
            .map_err(|_| err(format!("line {line}: bad number: {field}")))
    };
    let mut subjects: Vec<SubjectQuality> = Vec::new();
    let mut saw_header = false;
    for (lineno, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        if !saw_header {
            if line != QUALITY_COLUMNS {
                return Err(err(format!("unexpected column header: {line}")));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(err(format!("line {}: expected 9 fields", lineno + 1)));
        }
        let side = match fields[1] {
            "left" => Side::Left,
            "right" => Side::Right,
            other => return Err(err(format!("line {}: bad side: {other}", lineno + 1))),
        };
        let side_quality = SideQuality {
            ratio: parse_opt(fields[2], lineno + 1)?,
            msd_mm: parse_opt(fields[3], lineno + 1)?,
            d_init_fin_mm: parse_opt(fields[4], lineno + 1)?,
        };
        let delta = parse_opt(fields[5], lineno + 1)?;
        let exclusion = exclusion_from_str(fields[6])?;
        let displacement = parse_opt(fields[7], lineno + 1)?;
        let ge_14 = match fields[8] {
            "" => None,
            "true" => Some(true),
            "false" => Some(false),
            other => return Err(err(format!("line {}: bad flag: {other}", lineno + 1))),
        };
        let needs_new = subjects
            .last()
            .map_or(true, |s: &SubjectQuality| s.subject != fields[0]);
        if needs_new {
            subjects.push(SubjectQuality {
                subject: fields[0].to_string(),
                sides: PerSide::default(),
                delta_k_lr_mm: delta,
                exclusion,
                max_displacement_mm: displacement,
                displacement_ge_14mm: ge_14,
                delta_k_flagged: None,
            });
        }
        let subject = subjects.last_mut().unwrap();
        *subject.sides.get_mut(side) = side_quality;
    }
    if !saw_header {
        return Err(err("missing column header".into()));
    }
    Ok(subjects)
}

pub fn summary_csv(summaries: &[MetricSummary], header: &str) -> String {
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    out.push_str("metric,mean,min,max,n\n");
    for s in summaries {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.metric,
            fmt6(s.mean),
            fmt6(s.min),
            fmt6(s.max),
            s.n
        ));
    }
    out
}
