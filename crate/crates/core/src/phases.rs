//! Velocity-based detection of opening/closing intervals, motion-cycle
//! extraction with (start, max, end) triples, and best-match cycle pairing
//! between the axial and sagittal series.

use crate::error::{Error, Result};
use crate::series::ScalarSeries;
use crate::types::{PerSide, Side};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseLabel {
    Opening,
    Closing,
    Closed,
    Other,
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaseLabel::Opening => write!(f, "opening"),
            PhaseLabel::Closing => write!(f, "closing"),
            PhaseLabel::Closed => write!(f, "closed"),
            PhaseLabel::Other => write!(f, "other"),
        }
    }
}

/// Inclusive frame-index interval carrying one phase label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseInterval {
    pub label: PhaseLabel,
    pub start: usize,
    pub end: usize,
}

/// Thresholds of the velocity-based phase detector. All three are relative
/// or in seconds, so labels are invariant under amplitude scaling.
#[derive(Debug, Clone, Copy)]
pub struct PhaseParams {
    /// Velocity threshold as a fraction of the series' peak |velocity|.
    pub velocity_threshold_frac: f64,
    /// Minimal duration of an opening/closing interval, seconds.
    pub min_duration_s: f64,
    /// Closed band as a fraction of the global amplitude above the minimum.
    pub closed_band_frac: f64,
}

impl Default for PhaseParams {
    fn default() -> Self {
        Self {
            velocity_threshold_frac: 0.2,
            min_duration_s: 0.3,
            closed_band_frac: 0.1,
        }
    }
}

/// Central-difference velocity with one-sided ends.
fn velocity(series: &ScalarSeries) -> Vec<f64> {
    let n = series.len();
    let t = &series.times;
    let x = &series.values;
    (0..n)
        .map(|i| {
            if n == 1 {
                0.0
            } else if i == 0 {
                (x[1] - x[0]) / (t[1] - t[0])
            } else if i == n - 1 {
                (x[n - 1] - x[n - 2]) / (t[n - 1] - t[n - 2])
            } else {
                (x[i + 1] - x[i - 1]) / (t[i + 1] - t[i - 1])
            }
        })
        .collect()
}

/// Labels every frame of a (pre-filtered) series as opening, closing,
/// closed or other, and returns the non-overlapping ordered intervals.
pub fn detect_phases(series: &ScalarSeries, params: &PhaseParams) -> Result<Vec<PhaseInterval>> {
    let n = series.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "phase detection needs at least 2 frames".into(),
        ));
    }
    let v = velocity(series);
    let vmax = v.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let min = series.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = series.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let amplitude = max - min;
    if vmax <= 1e-12 || amplitude <= 1e-12 {
        return Err(Error::NoMotion);
    }
    let thr = params.velocity_threshold_frac * vmax;

    let mut labels = vec![PhaseLabel::Other; n];
    // Opening/closing runs, kept only when they last at least min_duration.
    let mut i = 0;
    while i < n {
        let lab = if v[i] > thr {
            Some(PhaseLabel::Opening)
        } else if v[i] < -thr {
            Some(PhaseLabel::Closing)
        } else {
            None
        };
        let Some(lab) = lab else {
            i += 1;
            continue;
        };
        let start = i;
        while i < n
            && ((lab == PhaseLabel::Opening && v[i] > thr)
                || (lab == PhaseLabel::Closing && v[i] < -thr))
        {
            i += 1;
        }
        let end = i - 1;
        if series.times[end] - series.times[start] >= params.min_duration_s {
            for l in &mut labels[start..=end] {
                *l = lab;
            }
        }
    }
    // Closed: low-value frames not already claimed by opening/closing.
    let closed_ceiling = min + params.closed_band_frac * amplitude;
    for idx in 0..n {
        if labels[idx] == PhaseLabel::Other && series.values[idx] <= closed_ceiling {
            labels[idx] = PhaseLabel::Closed;
        }
    }
    // Stationary runs framed by a closing movement on the left and an
    // opening movement on the right (or a series edge) are rest positions
    // even when slow head drift lifts them out of the fixed value band;
    // a midrange guard keeps open plateaus at the edges unlabeled.
    let midrange = min + 0.5 * amplitude;
    let mut i = 0;
    while i < n {
        if labels[i] != PhaseLabel::Other {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && labels[i] == PhaseLabel::Other {
            i += 1;
        }
        let end = i - 1;
        let prev_ok = start == 0
            || labels[start - 1] == PhaseLabel::Closing
            || labels[start - 1] == PhaseLabel::Closed;
        let next_ok = end + 1 == n
            || labels[end + 1] == PhaseLabel::Opening
            || labels[end + 1] == PhaseLabel::Closed;
        let mean =
            series.values[start..=end].iter().sum::<f64>() / (end - start + 1) as f64;
        if prev_ok && next_ok && mean <= midrange {
            for l in &mut labels[start..=end] {
                *l = PhaseLabel::Closed;
            }
        }
    }
    // Compress into intervals.
    let mut intervals = Vec::new();
    let mut start = 0;
    for idx in 1..=n {
        if idx == n || labels[idx] != labels[start] {
            intervals.push(PhaseInterval {
                label: labels[start],
                start,
                end: idx - 1,
            });
            start = idx;
        }
    }
    Ok(intervals)
}

/// Phase label of one frame according to a detected interval list.
pub fn label_at(phases: &[PhaseInterval], frame: usize) -> PhaseLabel {
    phases
        .iter()
        .find(|p| p.start <= frame && frame <= p.end)
        .map(|p| p.label)
        .unwrap_or(PhaseLabel::Other)
}

/// Per-side start/max/end triple and amplitude of one cycle, mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleSideStats {
    pub start_mm: f64,
    pub max_mm: f64,
    pub end_mm: f64,
    pub amplitude_mm: f64,
}

/// One closed-to-closed motion cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionCycle {
    pub start_frame: usize,
    pub peak_frame: usize,
    pub end_frame: usize,
    pub sides: PerSide<Option<CycleSideStats>>,
}

impl MotionCycle {
    /// Fills this cycle's stats for one side by re-windowing another series
    /// sampled on the same time base.
    pub fn fill_side(&mut self, side: Side, series: &ScalarSeries, window: usize) {
        *self.sides.get_mut(side) = Some(cycle_side_stats(
            series,
            self.start_frame,
            self.peak_frame,
            self.end_frame,
            window,
        ));
    }
}

/// Mean over a centered window of `window` frames, clamped to the series.
fn window_mean(series: &ScalarSeries, center: usize, window: usize) -> f64 {
    let half = window / 2;
    let lo = center.saturating_sub(half);
    let hi = (center + half).min(series.len() - 1);
    series.values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
}

/// Windowed (start, max, end) triple and amplitude for given cycle frames.
pub fn cycle_side_stats(
    series: &ScalarSeries,
    start: usize,
    peak: usize,
    end: usize,
    window: usize,
) -> CycleSideStats {
    let s = window_mean(series, start, window);
    let m = window_mean(series, peak, window);
    let e = window_mean(series, end, window);
    CycleSideStats {
        start_mm: s,
        max_mm: m,
        end_mm: e,
        amplitude_mm: (m - 0.5 * (s + e)).max(0.0),
    }
}

/// Extracts motion cycles: one per closed-to-closed span containing exactly
/// one opening and one closing, with the triple filled for `side`.
pub fn extract_cycles(
    series: &ScalarSeries,
    phases: &[PhaseInterval],
    side: Side,
    window: usize,
) -> Result<Vec<MotionCycle>> {
    let closed: Vec<&PhaseInterval> = phases
        .iter()
        .filter(|p| p.label == PhaseLabel::Closed)
        .collect();
    let openings: Vec<&PhaseInterval> = phases
        .iter()
        .filter(|p| p.label == PhaseLabel::Opening)
        .collect();
    let closings: Vec<&PhaseInterval> = phases
        .iter()
        .filter(|p| p.label == PhaseLabel::Closing)
        .collect();
    if openings.is_empty() || closings.is_empty() {
        return Err(Error::NoFullCycle);
    }
    let mut cycles = Vec::new();
    for w in closed.windows(2) {
        let (c1, c2) = (w[0], w[1]);
        let span = c1.end..=c2.start;
        let inside = |p: &PhaseInterval| span.contains(&p.start) && span.contains(&p.end);
        let n_open = openings.iter().filter(|p| inside(p)).count();
        let n_close = closings.iter().filter(|p| inside(p)).count();
        if n_open != 1 || n_close != 1 {
            continue;
        }
        let opening = openings.iter().find(|p| inside(p)).unwrap();
        let closing = closings.iter().find(|p| inside(p)).unwrap();
        if opening.start > closing.start {
            continue;
        }
        let start_frame = c1.end;
        let end_frame = c2.start;
        let peak_frame = (start_frame..=end_frame)
            .max_by(|&a, &b| series.values[a].partial_cmp(&series.values[b]).unwrap())
            .unwrap();
        let mut cycle = MotionCycle {
            start_frame,
            peak_frame,
            end_frame,
            sides: PerSide::new(None, None),
        };
        cycle.fill_side(side, series, window);
        cycles.push(cycle);
    }
    if cycles.is_empty() {
        return Err(Error::NoFullCycle);
    }
    Ok(cycles)
}

/// The axial/sagittal cycle pair with the best amplitude match.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclePair {
    pub axial: MotionCycle,
    pub axial_index: usize,
    pub sagittal: MotionCycle,
    pub sagittal_index: usize,
    /// A_AX / A_SAG per side, where both sides carry stats.
    pub ratio: PerSide<Option<f64>>,
}

/// L1 amplitude mismatch over the sides present in both cycles.
pub fn pair_cost(a: &MotionCycle, s: &MotionCycle) -> Option<f64> {
    let mut cost = 0.0;
    let mut any = false;
    for side in Side::BOTH {
        if let (Some(ax), Some(sg)) = (a.sides.get(side), s.sides.get(side)) {
            cost += (ax.amplitude_mm - sg.amplitude_mm).abs();
            any = true;
        }
    }
    any.then_some(cost)
}

/// Selects the axial/sagittal cycle pair minimizing the summed per-side
/// amplitude mismatch; ties go to the earliest axial, then sagittal, cycle.
pub fn best_match(axial: &[MotionCycle], sagittal: &[MotionCycle]) -> Result<CyclePair> {
    if axial.is_empty() || sagittal.is_empty() {
        return Err(Error::NoFullCycle);
    }
    let mut best: Option<(usize, usize, f64)> = None;
    for (ai, a) in axial.iter().enumerate() {
        for (si, s) in sagittal.iter().enumerate() {
            let Some(cost) = pair_cost(a, s) else { continue };
            if best.map_or(true, |(_, _, bc)| cost < bc) {
                best = Some((ai, si, cost));
            }
        }
    }
    let (ai, si, _) = best.ok_or_else(|| {
        Error::InvalidArgument("no side has amplitudes in both cycle lists".into())
    })?;
    let a = axial[ai].clone();
    let s = sagittal[si].clone();
    let ratio = PerSide::new(
        ratio_for(&a, &s, Side::Left),
        ratio_for(&a, &s, Side::Right),
    );
    Ok(CyclePair {
        axial: a,
        axial_index: ai,
        sagittal: s,
        sagittal_index: si,
        ratio,
    })
}

fn ratio_for(a: &MotionCycle, s: &MotionCycle, side: Side) -> Option<f64> {
    match (a.sides.get(side), s.sides.get(side)) {
        (Some(ax), Some(sg)) if sg.amplitude_mm > 0.0 => Some(ax.amplitude_mm / sg.amplitude_mm),
        _ => None,
    }
}

/// Mean of the series over the 3-frame windows around every cycle peak.
pub fn anterior_plateau(series: &ScalarSeries, cycles: &[MotionCycle], window: usize) -> Result<f64> {
    if cycles.is_empty() {
        return Err(Error::NoFullCycle);
    }
    let half = window / 2;
    let mut sum = 0.0;
    let mut count = 0usize;
    for c in cycles {
        let lo = c.peak_frame.saturating_sub(half);
        let hi = (c.peak_frame + half).min(series.len() - 1);
        for v in &series.values[lo..=hi] {
            sum += v;
            count += 1;
        }
    }
    Ok(sum / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cosine_cycles(amps: &[f64], period: f64, dt: f64) -> ScalarSeries {
        let n = (amps.len() as f64 * period / dt).round() as usize + 1;
        let times: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let values: Vec<f64> = times
            .iter()
            .map(|&t| {
                let c = ((t / period).floor() as usize).min(amps.len() - 1);
                amps[c] * (1.0 - (2.0 * std::f64::consts::PI * t / period).cos()) / 2.0
            })
            .collect();
        ScalarSeries::new(times, values).unwrap()
    }

    #[test]
    fn detect_phases_single_cosine() {
        let s = cosine_cycles(&[10.0], 6.0, 0.05);
        let phases = detect_phases(&s, &PhaseParams::default()).unwrap();
        let openings: Vec<_> = phases
            .iter()
            .filter(|p| p.label == PhaseLabel::Opening)
            .collect();
        let closings: Vec<_> = phases
            .iter()
            .filter(|p| p.label == PhaseLabel::Closing)
            .collect();
        assert_eq!(openings.len(), 1);
        assert_eq!(closings.len(), 1);
        // Switch happens at the crest (t = 3 s, frame 60), within 1 frame.
        assert!((openings[0].end as i64 - 60).abs() <= 60 - openings[0].start as i64);
        assert!(openings[0].end < closings[0].start);
        let crest = 60usize;
        assert!(openings[0].end <= crest + 1 || closings[0].start >= crest.saturating_sub(1));
        // Intervals ordered and non-overlapping.
        for w in phases.windows(2) {
            assert!(w[0].end + 1 == w[1].start);
        }
    }

    #[test]
    fn detect_phases_constant_is_no_motion() {
        let s = ScalarSeries::new(vec![0.0, 1.0, 2.0], vec![4.0, 4.0, 4.0]).unwrap();
        assert!(matches!(
            detect_phases(&s, &PhaseParams::default()),
            Err(Error::NoMotion)
        ));
    }

    #[test]
    fn detect_phases_two_periods_alternate() {
        let s = cosine_cycles(&[10.0, 10.0], 6.0, 0.05);
        let phases = detect_phases(&s, &PhaseParams::default()).unwrap();
        let labs: Vec<_> = phases
            .iter()
            .filter(|p| p.label == PhaseLabel::Opening || p.label == PhaseLabel::Closing)
            .map(|p| p.label)
            .collect();
        assert_eq!(
            labs,
            vec![
                PhaseLabel::Opening,
                PhaseLabel::Closing,
                PhaseLabel::Opening,
                PhaseLabel::Closing
            ]
        );
    }

    #[test]
    fn extract_cycles_single_cosine() {
        let s = cosine_cycles(&[8.0], 6.0, 0.05);
        let phases = detect_phases(&s, &PhaseParams::default()).unwrap();
        let cycles = extract_cycles(&s, &phases, Side::Left, 3).unwrap();
        assert_eq!(cycles.len(), 1);
        let stats = cycles[0].sides.left.unwrap();
        assert!(stats.start_mm.abs() < 0.4);
        assert!(stats.end_mm.abs() < 0.4);
        assert!((stats.max_mm - 8.0).abs() < 0.1);
    }

    #[test]
    fn extract_cycles_ramp_has_no_full_cycle() {
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let values: Vec<f64> = times.iter().map(|&t| 2.0 * t).collect();
        let s = ScalarSeries::new(times, values).unwrap();
        let phases = detect_phases(&s, &PhaseParams::default()).unwrap();
        assert!(matches!(
            extract_cycles(&s, &phases, Side::Left, 3),
            Err(Error::NoFullCycle)
        ));
    }

    #[test]
    fn extract_cycles_three_amplitudes() {
        let amps = [10.0, 12.0, 9.0];
        let s = cosine_cycles(&amps, 6.0, 0.05);
        let phases = detect_phases(&s, &PhaseParams::default()).unwrap();
        let cycles = extract_cycles(&s, &phases, Side::Left, 3).unwrap();
        assert_eq!(cycles.len(), 3);
        for (c, &a) in cycles.iter().zip(&amps) {
            let got = c.sides.left.unwrap().amplitude_mm;
            assert!((got - a).abs() / a < 0.03, "amp {got} vs {a}");
        }
    }

    fn cycle_with_amps(left: f64, right: Option<f64>, start: usize) -> MotionCycle {
        let stats = |a: f64| CycleSideStats {
            start_mm: 0.0,
            max_mm: a,
            end_mm: 0.0,
            amplitude_mm: a,
        };
        MotionCycle {
            start_frame: start,
            peak_frame: start + 5,
            end_frame: start + 10,
            sides: PerSide::new(Some(stats(left)), right.map(stats)),
        }
    }

    #[test]
    fn best_match_identical_cycles() {
        let a = vec![cycle_with_amps(10.0, Some(10.0), 0)];
        let s = vec![cycle_with_amps(10.0, Some(10.0), 0)];
        let pair = best_match(&a, &s).unwrap();
        assert_eq!(pair.axial_index, 0);
        assert_eq!(pair.sagittal_index, 0);
        assert_eq!(pair.ratio.left, Some(1.0));
        assert_eq!(pair.ratio.right, Some(1.0));
    }

    #[test]
    fn best_match_enumerates_candidates() {
        let a = vec![
            cycle_with_amps(10.0, None, 0),
            cycle_with_amps(14.0, None, 20),
        ];
        let s = vec![cycle_with_amps(13.5, None, 0)];
        let pair = best_match(&a, &s).unwrap();
        assert_eq!(pair.axial_index, 1);
        assert_relative_eq!(pair.ratio.left.unwrap(), 14.0 / 13.5, epsilon = 1e-12);
    }

    #[test]
    fn best_match_tie_prefers_earliest() {
        let a = vec![
            cycle_with_amps(10.0, None, 0),
            cycle_with_amps(10.0, None, 20),
        ];
        let s = vec![
            cycle_with_amps(10.0, None, 0),
            cycle_with_amps(10.0, None, 20),
        ];
        let pair = best_match(&a, &s).unwrap();
        assert_eq!((pair.axial_index, pair.sagittal_index), (0, 0));
    }

    #[test]
    fn best_match_cost_is_optimal() {
        let a: Vec<_> = [3.0, 7.5, 12.0]
            .iter()
            .enumerate()
            .map(|(i, &x)| cycle_with_amps(x, Some(x * 1.1), i * 10))
            .collect();
        let s: Vec<_> = [6.9, 11.0]
            .iter()
            .enumerate()
            .map(|(i, &x)| cycle_with_amps(x, Some(x * 0.9), i * 10))
            .collect();
        let pair = best_match(&a, &s).unwrap();
        let chosen = pair_cost(&pair.axial, &pair.sagittal).unwrap();
        for ca in &a {
            for cs in &s {
                assert!(chosen <= pair_cost(ca, cs).unwrap() + 1e-12);
            }
        }
    }

    #[test]
    fn best_match_empty_is_error() {
        assert!(matches!(
            best_match(&[], &[cycle_with_amps(1.0, None, 0)]),
            Err(Error::NoFullCycle)
        ));
    }

    #[test]
    fn anterior_plateau_means() {
        // Flat series: plateau equals the constant.
        let s = ScalarSeries::new(
            (0..30).map(|i| i as f64).collect(),
            vec![12.0; 30],
        )
        .unwrap();
        let c = MotionCycle {
            start_frame: 0,
            peak_frame: 15,
            end_frame: 29,
            sides: PerSide::new(None, None),
        };
        assert_eq!(anterior_plateau(&s, &[c.clone()], 3).unwrap(), 12.0);

        // Two cycles with crest means 10 and 14.
        let mut values = vec![0.0; 40];
        for v in &mut values[9..12] {
            *v = 10.0;
        }
        for v in &mut values[29..32] {
            *v = 14.0;
        }
        let s = ScalarSeries::new((0..40).map(|i| i as f64).collect(), values).unwrap();
        let c1 = MotionCycle {
            start_frame: 0,
            peak_frame: 10,
            end_frame: 19,
            sides: PerSide::new(None, None),
        };
        let c2 = MotionCycle {
            start_frame: 20,
            peak_frame: 30,
            end_frame: 39,
            sides: PerSide::new(None, None),
        };
        assert_eq!(anterior_plateau(&s, &[c1, c2], 3).unwrap(), 12.0);
    }

    #[test]
    fn phase_labels_time_shift_invariant() {
        let s = cosine_cycles(&[10.0, 11.0], 6.0, 0.05);
        let shifted = ScalarSeries::new(
            s.times.iter().map(|t| t + 100.0).collect(),
            s.values.clone(),
        )
        .unwrap();
        let p0 = detect_phases(&s, &PhaseParams::default()).unwrap();
        let p1 = detect_phases(&shifted, &PhaseParams::default()).unwrap();
        assert_eq!(p0, p1);
    }

    #[test]
    fn phase_labels_amplitude_scale_invariant() {
        let s = cosine_cycles(&[10.0, 11.0], 6.0, 0.05);
        let scaled = ScalarSeries::new(
            s.times.clone(),
            s.values.iter().map(|v| v * 3.5).collect(),
        )
        .unwrap();
        let p0 = detect_phases(&s, &PhaseParams::default()).unwrap();
        let p1 = detect_phases(&scaled, &PhaseParams::default()).unwrap();
        assert_eq!(p0, p1);
        let c0 = extract_cycles(&s, &p0, Side::Left, 3).unwrap();
        let c1 = extract_cycles(&scaled, &p1, Side::Left, 3).unwrap();
        for (a, b) in c0.iter().zip(&c1) {
            let (sa, sb) = (a.sides.left.unwrap(), b.sides.left.unwrap());
            assert_relative_eq!(sb.amplitude_mm, 3.5 * sa.amplitude_mm, epsilon = 1e-9);
        }
    }
}
