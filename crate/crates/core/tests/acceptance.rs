//! End-to-end acceptance suite. Each test covers one numbered criterion and
//! prints a single PASS/FAIL line (visible with `--nocapture`); assertions
//! carry the details. Criteria 8 and 10 exercise the command-line binary and
//! live in the cli crate's test suite.

use condylar_core::config::PipelineConfig;
use condylar_core::geometry::{
    build_basis, patient_to_plane, pixel_to_patient, project_sagittal_to_basis,
    project_sagittal_via_angles, project_to_basis, sagittal_frames, PatientPoint, SliceGeometry,
};
use condylar_core::manifest::LoadedDataset;
use condylar_core::metrics::{msd, MsdMode};
use condylar_core::phantom::{compare_to_truth, Phantom, PhantomSpec};
use condylar_core::phases::{best_match, detect_phases, extract_cycles, PhaseParams};
use condylar_core::pipeline::{run_pipeline, PipelineOutput};
use condylar_core::series::ScalarSeries;
use condylar_core::temporal::{dtw_align, smooth_spline};
use condylar_core::types::{Side, SliceLabel};
use nalgebra::{Rotation3, Unit, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn criterion(n: usize, what: &str, body: impl FnOnce() + std::panic::UnwindSafe) {
    match std::panic::catch_unwind(body) {
        Ok(()) => println!("criterion {n}: PASS - {what}"),
        Err(e) => {
            println!("criterion {n}: FAIL - {what}");
            std::panic::resume_unwind(e);
        }
    }
}

fn run_phantom(spec: PhantomSpec, config: &PipelineConfig) -> (Phantom, PipelineOutput) {
    let phantom = Phantom::new(spec).expect("valid spec");
    let dataset = phantom.render().expect("render");
    let data = LoadedDataset::from_phantom(&dataset, "subject");
    let out = run_pipeline(&data, config, false).expect("pipeline");
    (phantom, out)
}

#[test]
fn acceptance_01_ideal_phantom_round_trip() {
    criterion(1, "ideal phantom round-trip within tolerance and time", || {
        let spec = PhantomSpec::default();
        let phantom = Phantom::new(spec).unwrap();
        let dataset = phantom.render().unwrap();
        let data = LoadedDataset::from_phantom(&dataset, "ideal");
        let config = PipelineConfig::default();
        let start = Instant::now();
        let out = run_pipeline(&data, &config, false).unwrap();
        let elapsed = start.elapsed();
        assert!(out.exclusion.is_none(), "unexpected exclusion {:?}", out.exclusion);
        let trajs = out.trajectories.as_ref().unwrap();
        let basis = phantom.truth_basis();
        for side in Side::BOTH {
            let cmp = compare_to_truth(trajs.get(side), &dataset.truth, &basis).unwrap();
            for (axis, rmse) in ["i", "j", "k"].iter().zip(cmp.per_axis_rmse_mm) {
                assert!(rmse < 0.5, "{side} {axis}-axis rmse {rmse:.3} mm");
            }
            let q = out.quality.sides.get(side);
            let msd_mm = q.msd_mm.unwrap();
            assert!(msd_mm < 0.1, "{side} open/close msd {msd_mm:.3} mm");
            let ratio = q.ratio.unwrap();
            assert!((ratio - 1.0).abs() <= 0.05, "{side} amplitude ratio {ratio:.3}");
        }
        let delta_k = out.quality.delta_k_lr_mm.unwrap();
        let sagittal_px = 100.0 / 168.0;
        assert!(
            delta_k.abs() <= 0.5 * sagittal_px,
            "delta k {delta_k:.3} mm vs half pixel {:.3}",
            0.5 * sagittal_px
        );
        assert!(elapsed.as_secs_f64() < 10.0, "runtime {elapsed:?}");
    });
}

#[test]
fn acceptance_02_head_drift_init_final_distance() {
    criterion(2, "2.0 mm head drift lands in d_init-fin", || {
        // 2.0 mm anterior drift spread over the 6 s single-cycle recording.
        let spec = PhantomSpec {
            n_cycles: 1.0,
            closed_dwell_s: 0.8,
            drift_velocity_mm_s: [0.0, -2.0 / 6.0, 0.0],
            seed: 2,
            ..PhantomSpec::default()
        };
        // A lower velocity threshold widens the analyzed cycle so more of
        // the recording's drift falls between its closed endpoints.
        let config = PipelineConfig {
            velocity_threshold_frac: 0.1,
            ..PipelineConfig::default()
        };
        let (_, out) = run_phantom(spec, &config);
        assert!(out.exclusion.is_none(), "unexpected exclusion {:?}", out.exclusion);
        for side in Side::BOTH {
            let d = out.quality.sides.get(side).d_init_fin_mm.unwrap();
            assert!((1.6..=2.4).contains(&d), "{side} d_init-fin {d:.3} mm");
        }
    });
}

#[test]
fn acceptance_03_axial_tilt_delta_k() {
    criterion(3, "1.7 mm slab tilt lands in delta k", || {
        // Condyles sit at x = ±30 mm, so a tilt of asin(1.7 / 60) leaves the
        // slab 1.7 mm higher over the left condyle than over the right one.
        // A shallower arc keeps the condyles inside the tilted slab.
        let spec = PhantomSpec {
            axial_tilt_deg: (1.7f64 / 60.0).asin().to_degrees(),
            inferior_weight: 0.5,
            seed: 3,
            ..PhantomSpec::default()
        };
        let (_, out) = run_phantom(spec, &PipelineConfig::default());
        assert!(out.exclusion.is_none(), "unexpected exclusion {:?}", out.exclusion);
        let delta_k = out.quality.delta_k_lr_mm.unwrap();
        assert!((1.2..=2.2).contains(&delta_k), "delta k {delta_k:.3} mm");
    });
}

#[test]
fn acceptance_04_amplitude_jitter_best_match() {
    criterion(4, "12% jitter: optimal cycle pairing, bounded ratio", || {
        let spec = PhantomSpec {
            jitter_frac: 0.12,
            n_cycles: 4.0,
            sagittal_offset_s: 6.0,
            seed: 11,
            ..PhantomSpec::default()
        };
        let jitter = spec.jitter_frac;

        // Exhaustive pairing oracle on noise-free cycle series sampled at
        // the two acquisition cadences, sagittal shifted by one period.
        let phantom = Phantom::new(spec.clone()).unwrap();
        let basis = phantom.truth_basis();
        let series_at = |dt: f64, offset: f64| -> ScalarSeries {
            let n = (spec.n_cycles * spec.period_s / dt).floor() as usize + 1;
            let times: Vec<f64> = (0..n).map(|f| offset + f as f64 * dt).collect();
            let values = times
                .iter()
                .map(|&t| project_to_basis(&basis, &phantom.position(Side::Left, t)).1)
                .collect();
            ScalarSeries::new(times, values).unwrap()
        };
        let params = PhaseParams::default();
        let axial_j = series_at(0.0211, 0.0);
        let sagittal_j = series_at(0.0525, spec.sagittal_offset_s);
        let axial_cycles = {
            let phases = detect_phases(&axial_j, &params).unwrap();
            extract_cycles(&axial_j, &phases, Side::Left, 3).unwrap()
        };
        let sagittal_cycles = {
            let phases = detect_phases(&sagittal_j, &params).unwrap();
            extract_cycles(&sagittal_j, &phases, Side::Left, 3).unwrap()
        };
        assert!(axial_cycles.len() >= 3, "axial cycles {}", axial_cycles.len());
        assert!(sagittal_cycles.len() >= 3, "sagittal cycles {}", sagittal_cycles.len());
        let pair = best_match(&axial_cycles, &sagittal_cycles).unwrap();
        let mismatch = |ai: usize, si: usize| -> f64 {
            let a = axial_cycles[ai].sides.left.unwrap().amplitude_mm;
            let s = sagittal_cycles[si].sides.left.unwrap().amplitude_mm;
            (a - s).abs()
        };
        let chosen = mismatch(pair.axial_index, pair.sagittal_index);
        for ai in 0..axial_cycles.len() {
            for si in 0..sagittal_cycles.len() {
                let m = mismatch(ai, si);
                assert!(
                    chosen <= m + 1e-12,
                    "pair ({},{}) mismatch {chosen:.4} beaten by ({ai},{si}) {m:.4}",
                    pair.axial_index,
                    pair.sagittal_index
                );
                if (m - chosen).abs() <= 1e-12 {
                    assert!(
                        (pair.axial_index, pair.sagittal_index) <= (ai, si),
                        "tie not resolved to the earliest pair"
                    );
                }
            }
        }

        // Full pipeline: the matched pair's amplitude ratio stays within
        // the injected jitter plus a 5% margin.
        let (_, out) = run_phantom(spec, &PipelineConfig::default());
        assert!(out.exclusion.is_none(), "unexpected exclusion {:?}", out.exclusion);
        for side in Side::BOTH {
            let ratio = out.quality.sides.get(side).ratio.unwrap();
            assert!(
                (ratio - 1.0).abs() <= jitter + 0.05,
                "{side} ratio {ratio:.3} vs bound {:.3}",
                1.0 + jitter + 0.05
            );
        }
    });
}

/// Point-to-segment distance by golden-section search on the segment
/// parameter; independent of the closed-form projection in the library.
fn segment_distance_search(p: &[f64; 3], a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let at = |t: f64| -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            let c = a[i] + t * (b[i] - a[i]);
            s += (p[i] - c) * (p[i] - c);
        }
        s.sqrt()
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if at(m1) <= at(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    at(0.0).min(at(1.0)).min(at(0.5 * (lo + hi)))
}

fn nearest_sample(p: &[f64; 3], seq: &[[f64; 3]]) -> f64 {
    seq.iter()
        .map(|q| {
            p.iter()
                .zip(q)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

fn msd_brute(u: &[[f64; 3]], v: &[[f64; 3]], mode: MsdMode) -> f64 {
    let point_min = |p: &[f64; 3], seq: &[[f64; 3]]| -> f64 {
        match mode {
            MsdMode::PointSet => nearest_sample(p, seq),
            MsdMode::Polyline if seq.len() == 1 => nearest_sample(p, seq),
            MsdMode::Polyline => (0..seq.len() - 1)
                .map(|s| segment_distance_search(p, &seq[s], &seq[s + 1]))
                .fold(f64::INFINITY, f64::min),
        }
    };
    let su: f64 = u.iter().map(|p| point_min(p, v)).sum();
    let sv: f64 = v.iter().map(|p| point_min(p, u)).sum();
    (su + sv) / (u.len() + v.len()) as f64
}

#[test]
fn acceptance_05_msd_oracle() {
    criterion(5, "msd matches brute force on 1000 random pairs", || {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        for case in 0..1000 {
            let mode = if case % 2 == 0 {
                MsdMode::Polyline
            } else {
                MsdMode::PointSet
            };
            let seq = |rng: &mut ChaCha8Rng| -> Vec<[f64; 3]> {
                let len = rng.gen_range(1..=8);
                (0..len)
                    .map(|_| std::array::from_fn(|_| rng.gen_range(-10.0..10.0)))
                    .collect()
            };
            let u = seq(&mut rng);
            let v = seq(&mut rng);
            let got = msd(&u, &v, mode).unwrap();
            let want = msd_brute(&u, &v, mode);
            assert!(
                (got - want).abs() <= 1e-9,
                "case {case} {mode:?}: {got} vs brute {want}"
            );
            let swapped = msd(&v, &u, mode).unwrap();
            assert!((got - swapped).abs() <= 1e-12, "case {case}: asymmetric");
            assert!(msd(&u, &u, mode).unwrap() <= 1e-12, "case {case}: self > 0");
        }
    });
}

/// Minimal alignment cost by depth-first enumeration of every monotone path
/// with steps (1,0), (0,1), (1,1).
fn dtw_brute(a: &[f64], b: &[f64]) -> f64 {
    fn go(a: &[f64], b: &[f64], i: usize, j: usize, acc: f64, best: &mut f64) {
        let acc = acc + (a[i] - b[j]).abs();
        if acc >= *best {
            return;
        }
        if i + 1 == a.len() && j + 1 == b.len() {
            *best = acc;
            return;
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            go(a, b, i + 1, j + 1, acc, best);
        }
        if i + 1 < a.len() {
            go(a, b, i + 1, j, acc, best);
        }
        if j + 1 < b.len() {
            go(a, b, i, j + 1, acc, best);
        }
    }
    let mut best = f64::INFINITY;
    go(a, b, 0, 0, 0.0, &mut best);
    best
}

#[test]
fn acceptance_06_dtw_oracle() {
    criterion(6, "dtw cost matches path enumeration on 500 pairs", || {
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        for case in 0..500 {
            let seq = |rng: &mut ChaCha8Rng| -> ScalarSeries {
                let len = rng.gen_range(1..=8);
                let values: Vec<f64> = (0..len).map(|_| rng.gen_range(-5.0..5.0)).collect();
                let times: Vec<f64> = (0..len).map(|f| f as f64 * 0.1).collect();
                ScalarSeries::new(times, values).unwrap()
            };
            let a = seq(&mut rng);
            let b = seq(&mut rng);
            let path = dtw_align(&a, &b).unwrap();
            assert!(path.is_valid(a.len(), b.len()), "case {case}: invalid path");
            let recomputed: f64 = path
                .pairs
                .iter()
                .map(|&(i, j)| (a.values[i] - b.values[j]).abs())
                .sum();
            assert!(
                (path.cost - recomputed).abs() <= 1e-9,
                "case {case}: cost {} vs pairs {recomputed}",
                path.cost
            );
            let want = dtw_brute(&a.values, &b.values);
            assert!(
                (path.cost - want).abs() <= 1e-9,
                "case {case}: cost {} vs brute {want}",
                path.cost
            );
        }
    });
}

fn random_rotation(rng: &mut ChaCha8Rng, max_angle: f64) -> Rotation3<f64> {
    let axis = Unit::new_normalize(Vector3::new(
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0f64) + 1e-3,
    ));
    Rotation3::from_axis_angle(&axis, rng.gen_range(-max_angle..max_angle))
}

#[test]
fn acceptance_07_geometry_suite() {
    criterion(7, "randomized geometry invariants", || {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for case in 0..100 {
            // A mildly tilted, translated acquisition around a random head
            // pose; tilts stay small enough that the anatomical orientation
            // conventions (anterior j, inferior k) are unambiguous.
            let pose = random_rotation(&mut rng, 0.15);
            let head: PatientPoint = Vector3::new(
                rng.gen_range(-20.0..20.0),
                rng.gen_range(-20.0..20.0),
                rng.gen_range(-20.0..20.0),
            );
            let spacing = rng.gen_range(0.5..2.0);
            let half = 67.5 * spacing;
            let axial = SliceGeometry::new(
                pose * Vector3::new(-half, -half, 0.0) + head,
                pose * Vector3::new(0.0, 1.0, 0.0),
                pose * Vector3::new(1.0, 0.0, 0.0),
                (spacing, spacing),
                136,
                136,
                rng.gen_range(4.0..10.0),
                0.0211,
                SliceLabel::Axial,
            )
            .unwrap();

            // Pixel <-> patient round trip.
            for _ in 0..10 {
                let rc = (rng.gen_range(-5.0..140.0), rng.gen_range(-5.0..140.0));
                let p = pixel_to_patient(&axial, rc).unwrap();
                let ((r, c), off) = patient_to_plane(&axial, &p);
                assert!((r - rc.0).abs() <= 1e-9 && (c - rc.1).abs() <= 1e-9, "case {case}");
                assert!(off.abs() <= 1e-9, "case {case}: off-plane {off}");
            }

            let sep = rng.gen_range(40.0..70.0);
            let left = head
                + pose
                    * Vector3::new(
                        sep / 2.0,
                        rng.gen_range(-5.0..5.0),
                        rng.gen_range(-2.0..2.0),
                    );
            let right = head
                + pose
                    * Vector3::new(
                        -sep / 2.0,
                        rng.gen_range(-5.0..5.0),
                        rng.gen_range(-2.0..2.0),
                    );
            let basis = build_basis(&left, &right, &axial).unwrap();

            // Orthonormal, right-handed, correctly oriented basis.
            for v in [basis.i, basis.j, basis.k] {
                assert!((v.norm() - 1.0).abs() <= 1e-9, "case {case}: non-unit axis");
            }
            assert!(basis.i.dot(&basis.j).abs() <= 1e-9, "case {case}");
            assert!(basis.i.dot(&basis.k).abs() <= 1e-9, "case {case}");
            assert!(basis.j.dot(&basis.k).abs() <= 1e-9, "case {case}");
            assert!((basis.i.cross(&basis.j) - basis.k).norm() <= 1e-9, "case {case}");

            // Rigid-motion equivariance: moving the whole scene leaves
            // basis coordinates unchanged.
            let motion = random_rotation(&mut rng, 0.2);
            let shift: PatientPoint = Vector3::new(
                rng.gen_range(-50.0..50.0),
                rng.gen_range(-50.0..50.0),
                rng.gen_range(-50.0..50.0),
            );
            let moved_axial = SliceGeometry::new(
                motion * axial.origin + shift,
                motion * axial.row_dir,
                motion * axial.col_dir,
                axial.pixel_spacing,
                axial.rows,
                axial.cols,
                axial.thickness,
                axial.frame_period,
                axial.label,
            )
            .unwrap();
            let moved_basis =
                build_basis(&(motion * left + shift), &(motion * right + shift), &moved_axial)
                    .unwrap();
            for _ in 0..5 {
                let p = head
                    + pose
                        * Vector3::new(
                            rng.gen_range(-40.0..40.0),
                            rng.gen_range(-40.0..40.0),
                            rng.gen_range(-3.0..3.0),
                        );
                let a = project_to_basis(&basis, &p);
                let b = project_to_basis(&moved_basis, &(motion * p + shift));
                assert!(
                    (a.0 - b.0).abs() <= 1e-6
                        && (a.1 - b.1).abs() <= 1e-6
                        && (a.2 - b.2).abs() <= 1e-6,
                    "case {case}: rigid equivariance {a:?} vs {b:?}"
                );
            }

            // Angle route and vector route agree for in-plane points of
            // sagittal slices through the condyle centers.
            let sag = |center: &PatientPoint, label: SliceLabel| {
                SliceGeometry::new(
                    center + pose * Vector3::new(0.0, -50.0, 50.0),
                    pose * Vector3::new(0.0, 0.0, -1.0),
                    pose * Vector3::new(0.0, 1.0, 0.0),
                    (100.0 / 168.0, 100.0 / 168.0),
                    168,
                    168,
                    6.0,
                    0.0525,
                    label,
                )
                .unwrap()
            };
            let sag_l = sag(&left, SliceLabel::SagittalLeft);
            let sag_r = sag(&right, SliceLabel::SagittalRight);
            let (axes_l, axes_r) = sagittal_frames(&basis, &axial, &sag_l, &sag_r).unwrap();
            for axes in [&axes_l, &axes_r] {
                for _ in 0..5 {
                    let p = axes.origin_point
                        + rng.gen_range(-30.0..30.0) * axes.j_dir
                        + rng.gen_range(-30.0..30.0) * axes.k_dir;
                    let (j1, k1) = project_sagittal_to_basis(axes, &basis, &p).unwrap();
                    let (j2, k2) = project_sagittal_via_angles(axes, &basis, &p);
                    assert!(
                        (j1 - j2).abs() <= 1e-9 && (k1 - k2).abs() <= 1e-9,
                        "case {case}: angle route ({j2},{k2}) vs vector route ({j1},{k1})"
                    );
                }
            }
        }
    });
}

#[test]
fn acceptance_09_spline_conventions() {
    criterion(9, "smoothing spline conventions", || {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for case in 0..50 {
            let n = rng.gen_range(8..64);
            let times: Vec<f64> = (0..n).map(|f| f as f64 * 0.05).collect();
            let noisy: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let s = ScalarSeries::new(times.clone(), noisy.clone()).unwrap();

            // p = 1 interpolates.
            let interp = smooth_spline(&s, 1.0).unwrap();
            for (a, b) in interp.values.iter().zip(&noisy) {
                assert!((a - b).abs() <= 1e-9, "case {case}: p=1 not interpolating");
            }

            // Straight lines are fixed points at any p.
            let (a0, b0) = (rng.gen_range(-5.0..5.0), rng.gen_range(-2.0..2.0));
            let line: Vec<f64> = times.iter().map(|&t| a0 + b0 * t).collect();
            let ls = ScalarSeries::new(times.clone(), line.clone()).unwrap();
            for p in [0.1, 0.5, 0.9] {
                let out = smooth_spline(&ls, p).unwrap();
                for (a, b) in out.values.iter().zip(&line) {
                    assert!((a - b).abs() <= 1e-9, "case {case}: line moved at p={p}");
                }
            }

            // The smoother is linear in the data.
            let other: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let os = ScalarSeries::new(times.clone(), other.clone()).unwrap();
            let (alpha, beta) = (1.7, -0.6);
            let combo: Vec<f64> = noisy
                .iter()
                .zip(&other)
                .map(|(x, y)| alpha * x + beta * y)
                .collect();
            let cs = ScalarSeries::new(times.clone(), combo).unwrap();
            let p = 0.1;
            let sa = smooth_spline(&s, p).unwrap();
            let sb = smooth_spline(&os, p).unwrap();
            let sc = smooth_spline(&cs, p).unwrap();
            let scale: f64 = sc
                .values
                .iter()
                .map(|v| v.abs())
                .fold(1.0f64, f64::max);
            for i in 0..n {
                let want = alpha * sa.values[i] + beta * sb.values[i];
                assert!(
                    (sc.values[i] - want).abs() <= 1e-6 * scale,
                    "case {case}: non-linear smoother at {i}"
                );
            }
        }
    });
}
