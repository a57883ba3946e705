//! Pipeline configuration: every threshold that is not fixed by geometry is
//! exposed here, defaulted, and overridable via a TOML file or environment
//! variables prefixed with `CONDYLAR_`.

use crate::error::{Error, Result};
use crate::metrics::MsdMode;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

/// Which condyle point feeds the exported k channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointChoice {
    /// Condyle center of mass (default); the top point is still exported
    /// as the auxiliary k_top channel.
    IsCom,
    /// The condyle top point drives k, with the center of mass auxiliary.
    Top,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Median pre-filter window, frames (odd).
    pub median_window: usize,
    /// Low-pass cutoff in harmonics of the detected cycle frequency.
    pub lowpass_harmonics: f64,
    /// Shortest cycle period the detector may report, seconds.
    pub min_period_s: f64,
    /// Opening/closing velocity threshold, fraction of peak |velocity|.
    pub velocity_threshold_frac: f64,
    /// Minimal opening/closing interval duration, seconds.
    pub min_phase_duration_s: f64,
    /// Closed band above the series minimum, fraction of amplitude.
    pub closed_band_frac: f64,
    /// Window for cycle start/max/end triples, frames (odd).
    pub triple_window: usize,
    /// Largest tolerated fraction of missing frames per channel.
    pub missing_tolerance: f64,
    /// Minimal fraction of sagittal frames inside the axial slab.
    pub coverage_threshold: f64,
    /// Smoothing-spline parameter; 1 interpolates.
    pub smoothing_p: f64,
    /// |Δk_L-R| above this flags asymmetric slice placement, mm.
    pub delta_k_flag_mm: f64,
    /// Point-to-curve convention of the MSD metric.
    pub msd_mode: MsdMode,
    /// Condyle point feeding the k channel.
    pub point: PointChoice,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            median_window: 5,
            lowpass_harmonics: 5.0,
            min_period_s: 1.0,
            velocity_threshold_frac: 0.2,
            min_phase_duration_s: 0.3,
            closed_band_frac: 0.1,
            triple_window: 3,
            missing_tolerance: 0.1,
            coverage_threshold: 0.5,
            smoothing_p: 0.1,
            delta_k_flag_mm: 2.5,
            msd_mode: MsdMode::Polyline,
            point: PointChoice::IsCom,
        }
    }
}

pub const ENV_PREFIX: &str = "CONDYLAR_";

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: PipelineConfig = toml::from_str(text).map_err(|e| Error::Parse {
            file: "<config>".into(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: PipelineConfig = toml::from_str(&text).map_err(|e| Error::Parse {
            file: path.display().to_string(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Applies `CONDYLAR_<FIELD>` environment overrides, e.g.
    /// `CONDYLAR_MEDIAN_WINDOW=7`. Unknown keys with the prefix error out.
    pub fn apply_env(&mut self, vars: impl Iterator<Item = (String, String)>) -> Result<()> {
        for (key, value) in vars {
            let Some(field) = key.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let field = field.to_ascii_lowercase();
            let parse_f64 = |v: &str| -> Result<f64> {
                v.parse()
                    .map_err(|_| Error::InvalidArgument(format!("{key}: not a number: {v}")))
            };
            match field.as_str() {
                "median_window" => {
                    self.median_window = value.parse().map_err(|_| {
                        Error::InvalidArgument(format!("{key}: not an integer: {value}"))
                    })?
                }
                "triple_window" => {
                    self.triple_window = value.parse().map_err(|_| {
                        Error::InvalidArgument(format!("{key}: not an integer: {value}"))
                    })?
                }
                "lowpass_harmonics" => self.lowpass_harmonics = parse_f64(&value)?,
                "min_period_s" => self.min_period_s = parse_f64(&value)?,
                "velocity_threshold_frac" => self.velocity_threshold_frac = parse_f64(&value)?,
                "min_phase_duration_s" => self.min_phase_duration_s = parse_f64(&value)?,
                "closed_band_frac" => self.closed_band_frac = parse_f64(&value)?,
                "missing_tolerance" => self.missing_tolerance = parse_f64(&value)?,
                "coverage_threshold" => self.coverage_threshold = parse_f64(&value)?,
                "smoothing_p" => self.smoothing_p = parse_f64(&value)?,
                "delta_k_flag_mm" => self.delta_k_flag_mm = parse_f64(&value)?,
                "msd_mode" => {
                    self.msd_mode = match value.as_str() {
                        "polyline" => MsdMode::Polyline,
                        "pointset" => MsdMode::PointSet,
                        other => {
                            return Err(Error::InvalidArgument(format!(
                                "{key}: expected polyline|pointset, got {other}"
                            )))
                        }
                    }
                }
                "point" => {
                    self.point = match value.as_str() {
                        "iscom" => PointChoice::IsCom,
                        "top" => PointChoice::Top,
                        other => {
                            return Err(Error::InvalidArgument(format!(
                                "{key}: expected iscom|top, got {other}"
                            )))
                        }
                    }
                }
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown configuration variable {key}"
                    )))
                }
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if self.median_window == 0 || self.median_window % 2 == 0 {
            return Err(Error::InvalidArgument("median_window must be odd".into()));
        }
        if self.triple_window == 0 || self.triple_window % 2 == 0 {
            return Err(Error::InvalidArgument("triple_window must be odd".into()));
        }
        if !(0.0 < self.smoothing_p && self.smoothing_p <= 1.0) {
            return Err(Error::InvalidArgument("smoothing_p must be in (0, 1]".into()));
        }
        for (name, v) in [
            ("velocity_threshold_frac", self.velocity_threshold_frac),
            ("closed_band_frac", self.closed_band_frac),
            ("missing_tolerance", self.missing_tolerance),
            ("coverage_threshold", self.coverage_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("{name} must be in [0, 1]")));
            }
        }
        if self.lowpass_harmonics <= 0.0 || self.min_period_s <= 0.0 {
            return Err(Error::InvalidArgument(
                "lowpass_harmonics and min_period_s must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Stable hash of the full effective configuration, hex.
    pub fn sha256(&self) -> String {
        let text = toml::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn toml_round_trip_and_partial_override() {
        let c = PipelineConfig::from_toml_str("median_window = 7\nsmoothing_p = 0.5\n").unwrap();
        assert_eq!(c.median_window, 7);
        assert_eq!(c.smoothing_p, 0.5);
        assert_eq!(c.coverage_threshold, 0.5);
        let text = toml::to_string(&c).unwrap();
        let back = PipelineConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(PipelineConfig::from_toml_str("not_a_knob = 3\n").is_err());
        assert!(PipelineConfig::from_toml_str("median_window = 4\n").is_err());
        assert!(PipelineConfig::from_toml_str("smoothing_p = 0.0\n").is_err());
    }

    #[test]
    fn env_overrides() {
        let mut c = PipelineConfig::default();
        c.apply_env(
            vec![
                ("CONDYLAR_MEDIAN_WINDOW".to_string(), "9".to_string()),
                ("CONDYLAR_POINT".to_string(), "top".to_string()),
                ("UNRELATED".to_string(), "x".to_string()),
            ]
            .into_iter(),
        )
        .unwrap();
        assert_eq!(c.median_window, 9);
        assert_eq!(c.point, PointChoice::Top);
        assert!(c
            .apply_env(vec![("CONDYLAR_BOGUS".to_string(), "1".to_string())].into_iter())
            .is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        assert_eq!(a.sha256(), b.sha256());
        b.smoothing_p = 0.2;
        assert_ne!(a.sha256(), b.sha256());
        assert_eq!(a.sha256().len(), 64);
    }
}
