//! Per-frame scalar series with a shared time base.

use crate::error::{Error, Result};

/// One scalar channel sampled per frame. Missing frames are NaN until
/// filled by [`ScalarSeries::interpolate_missing`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl ScalarSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidArgument(
                "times and values lengths differ".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "times must be strictly increasing".into(),
            ));
        }
        Ok(Self { times, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Fraction of NaN values.
    pub fn missing_fraction(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().filter(|v| v.is_nan()).count() as f64 / self.values.len() as f64
    }

    /// Fraction of NaN values within an inclusive frame range.
    pub fn missing_fraction_in(&self, start: usize, end: usize) -> f64 {
        let slice = &self.values[start..=end];
        slice.iter().filter(|v| v.is_nan()).count() as f64 / slice.len() as f64
    }

    /// Fills NaN values by linear interpolation over time; leading/trailing
    /// gaps are extended from the nearest finite value. Errors when the
    /// missing fraction exceeds `max_fraction` or nothing is finite.
    pub fn interpolate_missing(&mut self, max_fraction: f64) -> Result<()> {
        let frac = self.missing_fraction();
        if frac == 0.0 {
            return Ok(());
        }
        if frac > max_fraction {
            return Err(Error::Coverage(format!(
                "{:.0}% of frames are missing (tolerance {:.0}%)",
                frac * 100.0,
                max_fraction * 100.0
            )));
        }
        let finite: Vec<usize> = (0..self.len())
            .filter(|&i| self.values[i].is_finite())
            .collect();
        if finite.is_empty() {
            return Err(Error::Coverage("all frames are missing".into()));
        }
        for i in 0..self.len() {
            if self.values[i].is_finite() {
                continue;
            }
            let prev = finite.iter().rev().find(|&&f| f < i).copied();
            let next = finite.iter().find(|&&f| f > i).copied();
            self.values[i] = match (prev, next) {
                (Some(p), Some(n)) => {
                    let w = (self.times[i] - self.times[p]) / (self.times[n] - self.times[p]);
                    self.values[p] + w * (self.values[n] - self.values[p])
                }
                (Some(p), None) => self.values[p],
                (None, Some(n)) => self.values[n],
                (None, None) => unreachable!(),
            };
        }
        Ok(())
    }

    /// Sub-series over an inclusive frame range.
    pub fn slice(&self, start: usize, end: usize) -> ScalarSeries {
        ScalarSeries {
            times: self.times[start..=end].to_vec(),
            values: self.values[start..=end].to_vec(),
        }
    }

    /// Median frame period.
    pub fn frame_period(&self) -> f64 {
        if self.len() < 2 {
            return 1.0;
        }
        let mut dts: Vec<f64> = self.times.windows(2).map(|w| w[1] - w[0]).collect();
        dts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        dts[dts.len() / 2]
    }
}

/// Element-wise mean of two equal-length series on the same time base.
pub fn mean_series(a: &ScalarSeries, b: &ScalarSeries) -> Result<ScalarSeries> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument("series lengths differ".into()));
    }
    Ok(ScalarSeries {
        times: a.times.clone(),
        values: a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| 0.5 * (x + y))
            .collect(),
    })
}
