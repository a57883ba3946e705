//! Temporal processing: median and adaptive low-pass filtering, dynamic
//! time warping between the axial and sagittal time bases, and penalized
//! smoothing-spline fitting.

use crate::error::{Error, Result};
use crate::series::ScalarSeries;

/// Sliding median with the given odd window; edges shrink.
pub fn median_filter(series: &ScalarSeries, window: usize) -> Result<ScalarSeries> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::InvalidArgument(
            "median window must be odd and >= 1".into(),
        ));
    }
    let n = series.len();
    let half = window / 2;
    let mut out = Vec::with_capacity(n);
    let mut buf = Vec::with_capacity(window);
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(n.saturating_sub(1));
        buf.clear();
        buf.extend_from_slice(&series.values[lo..=hi]);
        buf.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let m = buf.len();
        out.push(if m % 2 == 1 {
            buf[m / 2]
        } else {
            0.5 * (buf[m / 2 - 1] + buf[m / 2])
        });
    }
    Ok(ScalarSeries {
        times: series.times.clone(),
        values: out,
    })
}

/// Second-order Butterworth low-pass coefficients via the bilinear
/// transform, normalized to exact unit DC gain.
fn butterworth_lowpass(cutoff_hz: f64, sample_rate_hz: f64) -> ([f64; 3], [f64; 2]) {
    let k = (std::f64::consts::PI * cutoff_hz / sample_rate_hz).tan();
    let sqrt2 = std::f64::consts::SQRT_2;
    let norm = 1.0 + sqrt2 * k + k * k;
    let mut b = [k * k / norm, 2.0 * k * k / norm, k * k / norm];
    let a = [2.0 * (k * k - 1.0) / norm, (1.0 - sqrt2 * k + k * k) / norm];
    let dc = (1.0 + a[0] + a[1]) / (b[0] + b[1] + b[2]);
    for v in &mut b {
        *v *= dc;
    }
    (b, a)
}

/// Single-pass biquad (direct form II transposed), state initialized to the
/// DC steady state of the first sample.
fn biquad(x: &[f64], b: &[f64; 3], a: &[f64; 2]) -> Vec<f64> {
    let x0 = x.first().copied().unwrap_or(0.0);
    let mut z2 = (b[2] - a[1]) * x0;
    let mut z1 = (b[1] - a[0]) * x0 + z2;
    let mut y = Vec::with_capacity(x.len());
    for &xi in x {
        let yi = b[0] * xi + z1;
        z1 = b[1] * xi - a[0] * yi + z2;
        z2 = b[2] * xi - a[1] * yi;
        y.push(yi);
    }
    y
}

/// Zero-phase (forward-backward) filtering with odd-reflection padding.
fn filtfilt(x: &[f64], b: &[f64; 3], a: &[f64; 2], padlen: usize) -> Vec<f64> {
    let n = x.len();
    let pad = padlen.min(n.saturating_sub(1));
    let mut ext = Vec::with_capacity(n + 2 * pad);
    for i in (1..=pad).rev() {
        ext.push(2.0 * x[0] - x[i]);
    }
    ext.extend_from_slice(x);
    for i in 1..=pad {
        ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
    }
    let mut y = biquad(&ext, b, a);
    y.reverse();
    let mut y = biquad(&y, b, a);
    y.reverse();
    y[pad..pad + n].to_vec()
}

/// Estimated dominant period in samples via the normalized autocorrelation
/// peak at lags of at least `min_lag`. None when no usable peak exists.
fn dominant_period_samples(values: &[f64], min_lag: usize) -> Option<usize> {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let x: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let r0 = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if r0 <= 1e-12 {
        return None;
    }
    let max_lag = n / 2;
    if min_lag >= max_lag {
        return None;
    }
    let r: Vec<f64> = (1..=max_lag)
        .map(|lag| {
            let m = n - lag;
            (0..m).map(|i| x[i] * x[i + lag]).sum::<f64>() / m as f64
        })
        .collect();
    // A bare argmax would latch onto the shortest lag for any one-sided
    // (non-periodic) signal; the period peak is only meaningful past the
    // first zero crossing of the autocorrelation.
    let zc = r.iter().position(|&v| v <= 0.0)?;
    let best = (zc..r.len())
        .max_by(|&a, &b| r[a].partial_cmp(&r[b]).unwrap())
        .unwrap();
    if r[best] >= 0.2 * r0 {
        return Some((best + 1).max(min_lag));
    }
    // No repeat within the recording (e.g. a single cycle): the central
    // lobe width still bounds the period from below.
    Some((4 * (zc + 1)).max(min_lag))
}

/// Adaptive zero-phase low-pass: estimates the dominant motion period from
/// the autocorrelation peak and keeps `harmonics` harmonics of it. Returns
/// the input unchanged when no period is detectable or the cutoff exceeds
/// what the sampling supports.
pub fn adaptive_lowpass(
    series: &ScalarSeries,
    harmonics: f64,
    min_period_s: f64,
) -> Result<ScalarSeries> {
    if series.len() < 8 {
        return Err(Error::InvalidArgument(
            "adaptive low-pass needs at least 8 frames".into(),
        ));
    }
    let first = series.values[0];
    if series.values.iter().all(|&v| v == first) {
        return Ok(series.clone());
    }
    let dt = series.frame_period();
    let fs = 1.0 / dt;
    let min_lag = ((min_period_s / dt).round() as usize).max(2);
    let Some(lag) = dominant_period_samples(&series.values, min_lag) else {
        return Ok(series.clone());
    };
    let period = lag as f64 * dt;
    let cutoff = harmonics / period;
    if cutoff >= 0.45 * fs {
        return Ok(series.clone());
    }
    let (b, a) = butterworth_lowpass(cutoff, fs);
    let padlen = ((2.0 * fs / cutoff).ceil() as usize).max(9);
    Ok(ScalarSeries {
        times: series.times.clone(),
        values: filtfilt(&series.values, &b, &a, padlen),
    })
}

/// A monotone alignment between a reference and a query series.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpPath {
    /// Ordered (ref_index, query_index) pairs from (0,0) to (n-1, m-1).
    pub pairs: Vec<(usize, usize)>,
    /// Summed local |ref - query| distance along the path.
    pub cost: f64,
}

impl WarpPath {
    /// Identity alignment for equal-length series.
    pub fn diagonal(n: usize) -> Self {
        WarpPath {
            pairs: (0..n).map(|i| (i, i)).collect(),
            cost: 0.0,
        }
    }

    pub fn is_valid(&self, ref_len: usize, query_len: usize) -> bool {
        if self.pairs.first() != Some(&(0, 0)) {
            return false;
        }
        if self.pairs.last() != Some(&(ref_len - 1, query_len - 1)) {
            return false;
        }
        self.pairs.windows(2).all(|w| {
            let (di, dj) = (w[1].0 as i64 - w[0].0 as i64, w[1].1 as i64 - w[0].1 as i64);
            matches!((di, dj), (1, 0) | (0, 1) | (1, 1))
        })
    }
}

/// Dynamic time warping with |.| local distance and steps
/// {(1,0), (0,1), (1,1)}; ties prefer the diagonal.
pub fn dtw_align(reference: &ScalarSeries, query: &ScalarSeries) -> Result<WarpPath> {
    let n = reference.len();
    let m = query.len();
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument("empty series in dtw_align".into()));
    }
    let mut acc = vec![f64::INFINITY; n * m];
    let idx = |i: usize, j: usize| i * m + j;
    for i in 0..n {
        for j in 0..m {
            let d = (reference.values[i] - query.values[j]).abs();
            let prev = if i == 0 && j == 0 {
                0.0
            } else {
                let mut best = f64::INFINITY;
                if i > 0 && j > 0 {
                    best = acc[idx(i - 1, j - 1)];
                }
                if i > 0 {
                    best = best.min(acc[idx(i - 1, j)]);
                }
                if j > 0 {
                    best = best.min(acc[idx(i, j - 1)]);
                }
                best
            };
            acc[idx(i, j)] = d + prev;
        }
    }
    // Backtrack, preferring the diagonal on ties.
    let mut pairs = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while i > 0 || j > 0 {
        let (ni, nj) = if i == 0 {
            (0, j - 1)
        } else if j == 0 {
            (i - 1, 0)
        } else {
            let diag = acc[idx(i - 1, j - 1)];
            let up = acc[idx(i - 1, j)];
            let left = acc[idx(i, j - 1)];
            if diag <= up && diag <= left {
                (i - 1, j - 1)
            } else if up <= left {
                (i - 1, j)
            } else {
                (i, j - 1)
            }
        };
        pairs.push((ni, nj));
        i = ni;
        j = nj;
    }
    pairs.reverse();
    Ok(WarpPath {
        pairs,
        cost: acc[idx(n - 1, m - 1)],
    })
}

/// Resamples a query series onto the reference time base: each reference
/// index takes the mean of the query values matched to it by the path.
pub fn apply_warp(path: &WarpPath, series: &ScalarSeries, target_len: usize) -> Result<ScalarSeries> {
    if series.is_empty() || !path.is_valid(target_len, series.len()) {
        return Err(Error::InvalidArgument(
            "warp path does not match series/target lengths".into(),
        ));
    }
    let mut sums = vec![0.0f64; target_len];
    let mut tsums = vec![0.0f64; target_len];
    let mut counts = vec![0usize; target_len];
    for &(ri, qi) in &path.pairs {
        sums[ri] += series.values[qi];
        tsums[ri] += series.times[qi];
        counts[ri] += 1;
    }
    let values: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .collect();
    let times: Vec<f64> = tsums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .collect();
    Ok(ScalarSeries { times, values })
}

/// Interior-knot second-difference operator (Q) applied to y: returns the
/// n-2 vector Qᵀy for knots at `t`.
fn second_differences(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    (0..n - 2)
        .map(|j| {
            let h0 = t[j + 1] - t[j];
            let h1 = t[j + 2] - t[j + 1];
            y[j] / h0 - y[j + 1] * (1.0 / h0 + 1.0 / h1) + y[j + 2] / h1
        })
        .collect()
}

/// Solves a symmetric positive-definite pentadiagonal system in place.
/// `diag`, `off1`, `off2` are the main and first/second super-diagonals.
fn solve_pentadiagonal(
    diag: &mut [f64],
    off1: &mut [f64],
    off2: &mut [f64],
    rhs: &mut [f64],
) {
    let n = diag.len();
    // LDLᵀ with bandwidth 2.
    for i in 0..n {
        let mut d = diag[i];
        if i >= 1 {
            d -= off1[i - 1] * off1[i - 1] * diag[i - 1];
        }
        if i >= 2 {
            d -= off2[i - 2] * off2[i - 2] * diag[i - 2];
        }
        diag[i] = d;
        if i + 1 < n {
            let mut e = off1[i];
            if i >= 1 {
                e -= off1[i - 1] * off2[i - 1] * diag[i - 1];
            }
            off1[i] = e / diag[i];
        }
        if i + 2 < n {
            off2[i] /= diag[i];
        }
    }
    // Forward substitution (L z = rhs).
    for i in 0..n {
        if i >= 1 {
            rhs[i] -= off1[i - 1] * rhs[i - 1];
        }
        if i >= 2 {
            rhs[i] -= off2[i - 2] * rhs[i - 2];
        }
    }
    // Diagonal scaling.
    for i in 0..n {
        rhs[i] /= diag[i];
    }
    // Back substitution (Lᵀ x = z).
    for i in (0..n).rev() {
        if i + 1 < n {
            rhs[i] -= off1[i] * rhs[i + 1];
        }
        if i + 2 < n {
            rhs[i] -= off2[i] * rhs[i + 2];
        }
    }
}

/// Cubic smoothing spline evaluated at the input times, minimizing
/// `p * sum (y - f)^2 + (1 - p) * integral f''^2` (p = 1 interpolates).
pub fn smooth_spline(series: &ScalarSeries, p: f64) -> Result<ScalarSeries> {
    let n = series.len();
    if n < 4 {
        return Err(Error::InvalidArgument(
            "smoothing spline needs at least 4 frames".into(),
        ));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidArgument(
            "smoothing parameter must be in (0, 1]".into(),
        ));
    }
    let alpha = (1.0 - p) / p;
    if alpha == 0.0 {
        return Ok(series.clone());
    }
    let t = &series.times;
    let y = &series.values;
    let m = n - 2;
    let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    // q[j] has entries (1/h[j], -1/h[j]-1/h[j+1], 1/h[j+1]) at rows j..j+2.
    let q = |j: usize| -> (f64, f64, f64) {
        (1.0 / h[j], -1.0 / h[j] - 1.0 / h[j + 1], 1.0 / h[j + 1])
    };
    // M = R + alpha QᵀQ, pentadiagonal.
    let mut diag = vec![0.0f64; m];
    let mut off1 = vec![0.0f64; m.saturating_sub(1)];
    let mut off2 = vec![0.0f64; m.saturating_sub(2)];
    for j in 0..m {
        let (a0, a1, a2) = q(j);
        diag[j] = (h[j] + h[j + 1]) / 3.0 + alpha * (a0 * a0 + a1 * a1 + a2 * a2);
        if j + 1 < m {
            let (b0, b1, _) = q(j + 1);
            off1[j] = h[j + 1] / 6.0 + alpha * (a1 * b0 + a2 * b1);
        }
        if j + 2 < m {
            let (c0, _, _) = q(j + 2);
            off2[j] = alpha * (a2 * c0);
        }
    }
    let mut gamma = second_differences(t, y);
    solve_pentadiagonal(&mut diag, &mut off1, &mut off2, &mut gamma);
    // g = y - alpha * Q gamma.
    let mut g = y.clone();
    for j in 0..m {
        let (a0, a1, a2) = q(j);
        g[j] -= alpha * a0 * gamma[j];
        g[j + 1] -= alpha * a1 * gamma[j];
        g[j + 2] -= alpha * a2 * gamma[j];
    }
    Ok(ScalarSeries {
        times: series.times.clone(),
        values: g,
    })
}

/// Roughness `integral f''^2` of the natural cubic spline interpolating
/// (times, values). Used as an independent check of smoothing strength.
pub fn natural_spline_roughness(times: &[f64], values: &[f64]) -> f64 {
    let n = times.len();
    if n < 3 {
        return 0.0;
    }
    let m = n - 2;
    let h: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    // Solve R gamma = Qᵀ y (tridiagonal), then roughness = gammaᵀ R gamma.
    let mut diag: Vec<f64> = (0..m).map(|j| (h[j] + h[j + 1]) / 3.0).collect();
    let off: Vec<f64> = (0..m.saturating_sub(1)).map(|j| h[j + 1] / 6.0).collect();
    let mut rhs = second_differences(times, values);
    // Thomas algorithm.
    for i in 1..m {
        let w = off[i - 1] / diag[i - 1];
        diag[i] -= w * off[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    let mut gamma = vec![0.0f64; m];
    gamma[m - 1] = rhs[m - 1] / diag[m - 1];
    for i in (0..m - 1).rev() {
        gamma[i] = (rhs[i] - off[i] * gamma[i + 1]) / diag[i];
    }
    let mut rough = 0.0;
    for j in 0..m {
        rough += gamma[j] * gamma[j] * (h[j] + h[j + 1]) / 3.0;
        if j + 1 < m {
            rough += 2.0 * gamma[j] * gamma[j + 1] * h[j + 1] / 6.0;
        }
    }
    rough
}
