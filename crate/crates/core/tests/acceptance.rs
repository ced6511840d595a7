//! Acceptance suite. Every test prints one `PASS`/`FAIL` line to stderr,
//! bypassing the test harness capture, and then asserts.

use std::collections::VecDeque;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use pothole_core::eval::{
    evaluate_frame, f_score, instance_metrics, pep, pixel_metrics, rmse, Aggregate, FrameInput,
};
use pothole_core::pipeline::{best_delta_pd, run_detection, sweep_delta_pd, Detection};
use pothole_core::road::{estimate_roll, fit_line};
use pothole_core::segment::{
    build_histogram, candidate_mask, connected_components, detect_below, find_road_threshold,
    pool_superpixels, slic, DetectParams, SuperpixelMap,
};
use pothole_core::stereo::{aggregate_costs, CostVolume, SgmParams};
use pothole_core::synth::{generate_scene, random_spec, scene_batch, BatchRanges};
use pothole_core::{
    io, is_valid, Connectivity, DisparityMap, LabelMap, PipelineConfig, RoadObservations,
    INVALID_DISPARITY,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn report(criterion: u32, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(
        std::io::stderr(),
        "{status} criterion {criterion}: {detail}"
    );
}

// ---------------------------------------------------------------------------
// 1. SGM aggregation against a scan-line dynamic program

/// Path costs along direction `r`, walking each scan line from the pixel
/// whose predecessor leaves the image.
fn dp_oracle(vol: &CostVolume, dirs: &[(isize, isize)], p1: f64, p2: f64) -> Vec<f64> {
    let (w, h, n) = (vol.width() as isize, vol.height() as isize, vol.levels());
    let mut total = vec![0.0; vol.costs().len()];
    let inside = |u: isize, v: isize| u >= 0 && v >= 0 && u < w && v < h;
    for &(dx, dy) in dirs {
        for v0 in 0..h {
            for u0 in 0..w {
                if inside(u0 - dx, v0 - dy) {
                    continue;
                }
                let (mut u, mut v) = (u0, v0);
                let mut prev: Option<Vec<f64>> = None;
                while inside(u, v) {
                    let c: Vec<f64> = (0..n)
                        .map(|d| f64::from(vol.get(u as usize, v as usize, d)))
                        .collect();
                    let cur: Vec<f64> = match &prev {
                        None => c,
                        Some(l) => {
                            let m = l.iter().cloned().fold(f64::INFINITY, f64::min);
                            (0..n)
                                .map(|d| {
                                    let mut best = l[d].min(m + p2);
                                    if d > 0 {
                                        best = best.min(l[d - 1] + p1);
                                    }
                                    if d + 1 < n {
                                        best = best.min(l[d + 1] + p1);
                                    }
                                    c[d] + best - m
                                })
                                .collect()
                        }
                    };
                    let base = ((v * w + u) as usize) * n;
                    for d in 0..n {
                        total[base + d] += cur[d];
                    }
                    prev = Some(cur);
                    u += dx;
                    v += dy;
                }
            }
        }
    }
    total
}

#[test]
fn criterion_1_sgm_matches_dynamic_program_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e6);
    let start = Instant::now();
    let mut mismatches = 0;
    for _ in 0..50 {
        let w = rng.random_range(1..=16);
        let h = rng.random_range(1..=16);
        let d_max = rng.random_range(0..=7);
        let costs = (0..w * h * (d_max + 1))
            .map(|_| rng.random_range(0..=24) as f32)
            .collect();
        let vol = CostVolume::new(w, h, d_max, costs).unwrap();
        let p1 = rng.random_range(0..=10) as f64;
        let p2 = p1 + rng.random_range(0..=30) as f64;
        let params = SgmParams::new(p1, p2, 5).unwrap();
        let got = aggregate_costs(&vol, &params);
        let want = dp_oracle(&vol, &params.directions, p1, p2);
        if got
            .costs()
            .iter()
            .zip(&want)
            .any(|(g, w)| f64::from(*g) != *w)
        {
            mismatches += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = mismatches == 0 && secs < 10.0;
    report(
        1,
        pass,
        &format!("{mismatches}/50 volumes differ from the oracle, {secs:.2} s (limit 10 s)"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 2. Least-squares line fit against dense normal equations

#[test]
fn criterion_2_line_fit_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x15a);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let k = 10f64.powf(rng.random_range(3f64.log10()..=4.0)).round() as usize;
        let k = k.clamp(3, 10_000);
        let phi: f64 = rng.random_range(-0.2..=0.2);
        let (a0, a1) = (rng.random_range(30.0..60.0), rng.random_range(0.02..0.2));
        let (mut us, mut vs, mut ds) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..k {
            let u: f64 = rng.random_range(0.0..640.0);
            let v: f64 = rng.random_range(0.0..480.0);
            us.push(u);
            vs.push(v);
            ds.push(a0 + a1 * (v * phi.cos() - u * phi.sin()) + noise.sample(&mut rng));
        }
        let obs = RoadObservations::new(us.clone(), vs.clone(), ds.clone()).unwrap();
        let fit = fit_line(&obs, phi).unwrap();

        let t = DMatrix::from_fn(k, 2, |i, j| {
            if j == 0 {
                1.0
            } else {
                vs[i] * phi.cos() - us[i] * phi.sin()
            }
        });
        let d = DVector::from_vec(ds);
        let a = (t.transpose() * &t)
            .lu()
            .solve(&(t.transpose() * d))
            .unwrap();
        for (got, want) in [(fit.model.a0, a[0]), (fit.model.a1, a[1])] {
            worst = worst.max((got - want).abs() / want.abs());
        }
    }
    let pass = worst <= 1e-9;
    report(
        2,
        pass,
        &format!("worst relative error {worst:.3e} over 100 sets (limit 1e-9)"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 3. Roll recovery

#[test]
fn criterion_3_roll_recovery() {
    let (a0, a1) = (18.0, 0.1);
    let bracket = (-15f64.to_radians(), 15f64.to_radians());
    let tol = PipelineConfig::default().roll_tol;
    let model_obs = |phi: f64, pts: &[(f64, f64)], noise: &mut dyn FnMut() -> f64| {
        let (mut us, mut vs, mut ds) = (Vec::new(), Vec::new(), Vec::new());
        for &(u, v) in pts {
            us.push(u);
            vs.push(v);
            ds.push(a0 + a1 * (v * phi.cos() - u * phi.sin()) + noise());
        }
        RoadObservations::new(us, vs, ds).unwrap()
    };
    let grid: Vec<(f64, f64)> = (0..80)
        .flat_map(|i| (0..30).map(move |j| (i as f64 * 8.0, 240.0 + j as f64 * 8.0)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x7011);
    let scattered: Vec<(f64, f64)> = (0..10_000)
        .map(|_| (rng.random_range(0.0..640.0), rng.random_range(240.0..480.0)))
        .collect();
    let normal = Normal::new(0.0, 0.1).unwrap();

    let (mut worst_clean, mut worst_noisy) = (0.0f64, 0.0f64);
    for deg in [-5.0f64, -2.0, 0.0, 2.0, 5.0] {
        let phi = deg.to_radians();
        let clean = model_obs(phi, &grid, &mut || 0.0);
        let err = (estimate_roll(&clean, bracket, tol).unwrap().model.phi - phi).to_degrees();
        worst_clean = worst_clean.max(err.abs());
        let noisy = model_obs(phi, &scattered, &mut || normal.sample(&mut rng));
        let err = (estimate_roll(&noisy, bracket, tol).unwrap().model.phi - phi).to_degrees();
        worst_noisy = worst_noisy.max(err.abs());
    }
    let pass = worst_clean <= 0.01 && worst_noisy <= 0.1;
    report(
        3,
        pass,
        &format!(
            "noiseless error {worst_clean:.4} deg (limit 0.01), sigma 0.1 error {worst_noisy:.4} deg (limit 0.1)"
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 4. End-to-end detection on a synthetic batch

/// Tolerance chosen by sweeping the calibration batch below; a change in the
/// pipeline that moves the optimum shows up as a failure of this suite.
const CALIBRATED_DELTA_PD: f64 = 0.30;
const CALIBRATION_SEED: u64 = 100;
const ACCEPTANCE_SEED: u64 = 1;
const BATCH: usize = 20;

fn calibrate(cfg: &PipelineConfig) -> f64 {
    let scenes = scene_batch(BATCH, CALIBRATION_SEED, &BatchRanges::default()).unwrap();
    let dets: Vec<Detection> = scenes
        .iter()
        .map(|s| run_detection(&s.left, &s.right, cfg).unwrap())
        .collect();
    let frames: Vec<(&Detection, &LabelMap)> = dets
        .iter()
        .zip(&scenes)
        .map(|(d, s)| (d, &s.gt_mask))
        .collect();
    let candidates: Vec<f64> = (1..=30).map(|i| i as f64 * 0.05).collect();
    best_delta_pd(&sweep_delta_pd(&frames, &candidates).unwrap()).unwrap()
}

#[test]
fn criterion_4_end_to_end_synthetic_detection() {
    let base = PipelineConfig::default();
    let delta = calibrate(&base);
    let calibrated = (delta - CALIBRATED_DELTA_PD).abs() < 1e-9;
    let cfg = PipelineConfig {
        delta_pd: CALIBRATED_DELTA_PD,
        ..base
    };

    let scenes = scene_batch(BATCH, ACCEPTANCE_SEED, &BatchRanges::default()).unwrap();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let mut frames = Vec::new();
    let mut deep_misses = 0;
    let mut slowest = 0.0f64;
    for s in &scenes {
        let start = Instant::now();
        let det = pool
            .install(|| run_detection(&s.left, &s.right, &cfg))
            .unwrap();
        let secs = start.elapsed().as_secs_f64();
        slowest = slowest.max(secs);
        let input = FrameInput {
            disparity: Some((&det.d1, &s.gt_disparity)),
            pred: &det.labels,
            gt: &s.gt_mask,
            runtime_ms: Some(secs * 1e3),
        };
        let f = evaluate_frame(&s.spec.seed.to_string(), input, &[1.0], cfg.iou_min).unwrap();
        deep_misses += f
            .instances
            .unmatched_gt
            .iter()
            .filter(|&&g| s.spec.potholes[g as usize - 1].depth >= 2.0)
            .count();
        frames.push(f);
    }
    let agg = Aggregate::from_frames(&frames);
    let (acc, f1, rate) = (agg.pixel.accuracy, agg.pixel.fscore, agg.detection_rate());
    let pass = calibrated
        && acc >= 0.99
        && f1 >= 0.85
        && rate >= 0.90
        && deep_misses == 0
        && slowest <= 5.0;
    report(
        4,
        pass,
        &format!(
            "calibrated delta_pd {delta:.2} (pinned {CALIBRATED_DELTA_PD:.2}); accuracy {acc:.4} (>= 0.99), \
             F {f1:.4} (>= 0.85), detection rate {rate:.3} (>= 0.90) from {}/{}/{} correct/incorrect/missed, \
             {deep_misses} misses of depth >= 2 px (0), slowest frame {slowest:.2} s single-threaded (<= 5)",
            agg.correct, agg.incorrect, agg.misdetection
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 5. Flatness of transformed disparities on plane scenes

#[test]
fn criterion_5_transformed_plane_is_flat() {
    let ranges = BatchRanges {
        potholes: (0, 0),
        ..BatchRanges::default()
    };
    let cfg = PipelineConfig::default();
    let (mut worst_std, mut worst_offset) = (0.0f64, 0.0f64);
    for seed in 200..205 {
        let scene = generate_scene(&random_spec(seed, &ranges).unwrap()).unwrap();
        let det = run_detection(&scene.left, &scene.right, &cfg).unwrap();
        let road: Vec<f64> = det
            .d2
            .values()
            .iter()
            .zip(scene.gt_mask.labels())
            .filter(|(d, &m)| is_valid(**d) && m == 0)
            .map(|(d, _)| *d)
            .collect();
        let n = road.len() as f64;
        let mean = road.iter().sum::<f64>() / n;
        let std = (road.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n).sqrt();
        worst_std = worst_std.max(std);
        worst_offset = worst_offset.max((mean - cfg.delta_dt).abs());
    }
    let pass = worst_std <= 1.0 && worst_offset <= 0.5;
    report(
        5,
        pass,
        &format!(
            "worst road std {worst_std:.3} px (limit 1.0), worst |mean - delta_dt| {worst_offset:.3} px (limit 0.5) over 5 plane scenes"
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 6. Threshold exactness and shift invariance

/// Road level by direct histogram construction and exhaustive search over
/// every contiguous split of the diagonal projections.
fn exhaustive_road_level(d2: &DisparityMap, bin_width: f64, band: f64) -> Option<f64> {
    let (w, h) = d2.dims();
    let mut bins: std::collections::BTreeMap<(i64, i64), (u64, f64, f64)> = Default::default();
    for v in 1..h.saturating_sub(1) {
        for u in 1..w.saturating_sub(1) {
            let c = d2.get(u, v);
            let mut sum = 0.0;
            let mut ok = is_valid(c);
            for dv in -1i64..=1 {
                for du in -1i64..=1 {
                    if (du, dv) != (0, 0) {
                        let x = d2.get((u as i64 + du) as usize, (v as i64 + dv) as usize);
                        ok &= is_valid(x);
                        sum += x;
                    }
                }
            }
            if !ok {
                continue;
            }
            let g2 = sum / 8.0;
            let key = (
                (c / bin_width).floor() as i64,
                (g2 / bin_width).floor() as i64,
            );
            let e = bins.entry(key).or_insert((0, 0.0, 0.0));
            e.0 += 1;
            e.1 += c;
            e.2 += g2;
        }
    }
    let mut pts: Vec<(f64, f64)> = bins
        .values()
        .filter(|(n, s1, s2)| ((s1 - s2) / *n as f64).abs() <= band)
        .map(|(n, s1, s2)| ((s1 + s2) / (2.0 * *n as f64), *n as f64))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mean = |p: &[(f64, f64)]| {
        p.iter().map(|x| x.0 * x.1).sum::<f64>() / p.iter().map(|x| x.1).sum::<f64>()
    };
    let sse = |p: &[(f64, f64)]| {
        let m = mean(p);
        p.iter().map(|x| (x.0 - m).powi(2) * x.1).sum::<f64>()
    };
    (1..pts.len())
        .filter(|&k| pts[k - 1].0 != pts[k].0)
        .map(|k| (sse(&pts[..k]) + sse(&pts[k..]), mean(&pts[k..])))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, high)| high)
}

/// Road at 30 with a few depressions, on a 1/64 px grid.
fn threshold_map(rng: &mut ChaCha8Rng) -> DisparityMap {
    let (w, h) = (rng.random_range(20..60), rng.random_range(20..60));
    let holes: Vec<(f64, f64, f64, f64)> = (0..rng.random_range(1..4))
        .map(|_| {
            (
                rng.random_range(0.0..w as f64),
                rng.random_range(0.0..h as f64),
                rng.random_range(3.0..8.0),
                rng.random_range(1.5..5.0),
            )
        })
        .collect();
    let noise = Normal::new(0.0, 0.3).unwrap();
    let mut r2 = ChaCha8Rng::seed_from_u64(rng.random());
    DisparityMap::from_fn(w, h, |u, v| {
        if r2.random_bool(0.02) {
            return INVALID_DISPARITY;
        }
        let mut d = 30.0 + noise.sample(&mut r2);
        for &(cu, cv, r, depth) in &holes {
            let q = ((u as f64 - cu).powi(2) + (v as f64 - cv).powi(2)) / (r * r);
            if q < 1.0 {
                d -= depth * (1.0 - q);
            }
        }
        (d * 64.0).round() / 64.0
    })
    .unwrap()
}

#[test]
fn criterion_6_threshold_exactness_and_shift_invariance() {
    let cfg = PipelineConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x7e5);
    let (mut worst, mut variant) = (0.0f64, 0);
    for _ in 0..60 {
        let d2 = threshold_map(&mut rng);
        let hist = build_histogram(&d2, cfg.bin_width).unwrap();
        let got = find_road_threshold(&hist, cfg.delta_pd, cfg.diagonal_band).unwrap();
        let want = exhaustive_road_level(&d2, cfg.bin_width, cfg.diagonal_band).unwrap();
        worst = worst.max((got.t_r - want).abs());

        let sp = slic(&d2, 40, cfg.compactness, cfg.slic_iterations).unwrap();
        let params = DetectParams::for_superpixels(&sp, 0, 1, Connectivity::Eight);
        let foreground = |map: &DisparityMap| {
            let h = build_histogram(map, cfg.bin_width).unwrap();
            let t = find_road_threshold(&h, 0.5, cfg.diagonal_band).unwrap();
            let d3 = pool_superpixels(map, &sp).unwrap();
            (
                candidate_mask(map, t.t_s),
                detect_below(&d3, &sp, t.t_s, &params).unwrap(),
            )
        };
        let reference = foreground(&d2);
        for c in [-7.0, 3.0, 12.5] {
            let shifted = d2.map_valid(|_, _, d| d + c);
            if foreground(&shifted) != reference {
                variant += 1;
            }
        }
    }
    let pass = worst <= 1e-9 && variant == 0;
    report(
        6,
        pass,
        &format!(
            "worst road-level gap to exhaustive 2-means {worst:.2e} over 60 histograms; {variant}/180 shifted maps changed the foreground"
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 7. Segmentation invariants

fn flood_components(mask: &LabelMap, conn: Connectivity) -> LabelMap {
    let (w, h) = mask.dims();
    let mut out = vec![0u32; w * h];
    let mut next = 0;
    for start in 0..w * h {
        if mask.labels()[start] == 0 || out[start] != 0 {
            continue;
        }
        next += 1;
        out[start] = next;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            let (u, v) = ((i % w) as isize, (i / w) as isize);
            for &(du, dv) in conn.offsets() {
                let (x, y) = (u + du, v + dv);
                if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
                    continue;
                }
                let j = y as usize * w + x as usize;
                if mask.labels()[j] != 0 && out[j] == 0 {
                    out[j] = next;
                    queue.push_back(j);
                }
            }
        }
    }
    LabelMap::new(w, h, out).unwrap()
}

/// Every label in `1..=count` is used and forms one 8-connected region.
fn connected_partition(sp: &SuperpixelMap) -> bool {
    let (w, h) = sp.labels.dims();
    let labels = sp.labels.labels();
    let n = sp.count();
    if labels.iter().any(|&l| l == 0 || l as usize > n) {
        return false;
    }
    (1..=n as u32).all(|k| {
        let mask = LabelMap::from_fn(w, h, |u, v| u32::from(sp.label(u, v) == k)).unwrap();
        let regions = flood_components(&mask, Connectivity::Eight);
        regions.max_label() == 1
    })
}

fn slic_map(rng: &mut ChaCha8Rng) -> DisparityMap {
    let (w, h) = (rng.random_range(40..=120), rng.random_range(40..=120));
    let (a, b) = (rng.random_range(-0.1..0.1), rng.random_range(0.0..0.2));
    let bumps: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.random_range(0.0..w as f64),
                rng.random_range(0.0..h as f64),
                rng.random_range(5.0..25.0),
                rng.random_range(-6.0..6.0),
            )
        })
        .collect();
    let noise = Normal::new(0.0, 0.4).unwrap();
    let mut r2 = ChaCha8Rng::seed_from_u64(rng.random());
    DisparityMap::from_fn(w, h, |u, v| {
        let (x, y) = (u as f64, v as f64);
        let mut d = 20.0 + a * x + b * y + noise.sample(&mut r2);
        for &(cu, cv, r, amp) in &bumps {
            d += amp * (-((x - cu).powi(2) + (y - cv).powi(2)) / (r * r)).exp();
        }
        d
    })
    .unwrap()
}

#[test]
fn criterion_7_segmentation_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x511c);
    let cfg = PipelineConfig::default();
    let (mut broken, mut off_count) = (0, 0);
    let mut worst_ratio = 1.0f64;
    for _ in 0..50 {
        let map = slic_map(&mut rng);
        let p = rng.random_range(20..=200).min(map.values().len() / 16);
        let sp = slic(&map, p, cfg.compactness, cfg.slic_iterations).unwrap();
        if !connected_partition(&sp) {
            broken += 1;
        }
        let ratio = sp.count() as f64 / p as f64;
        if (ratio - 1.0).abs() > 0.2 {
            off_count += 1;
        }
        if (ratio - 1.0).abs() > (worst_ratio - 1.0).abs() {
            worst_ratio = ratio;
        }
    }

    let mut ccl_mismatch = 0;
    for i in 0..100 {
        let (w, h) = (rng.random_range(2..=40), rng.random_range(2..=40));
        let density = rng.random_range(0.1..0.7);
        let mask = LabelMap::from_fn(w, h, |_, _| u32::from(rng.random_bool(density))).unwrap();
        let conn = if i % 2 == 0 {
            Connectivity::Four
        } else {
            Connectivity::Eight
        };
        let (got, n) = connected_components(&mask, conn).unwrap();
        let want = flood_components(&mask, conn);
        if got != want || n != want.max_label() as usize {
            ccl_mismatch += 1;
        }
    }
    let pass = broken == 0 && off_count == 0 && ccl_mismatch == 0;
    report(
        7,
        pass,
        &format!(
            "SLIC: {broken}/50 not connected partitions, {off_count}/50 counts outside +-20% (worst ratio {worst_ratio:.3}); \
             CCL: {ccl_mismatch}/100 differ from flood fill"
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 8. Metric unit checks

#[test]
fn criterion_8_metric_unit_checks() {
    let f = f_score(0.8982, 0.8903);
    let f_ok = (f - 0.8942).abs() <= 0.0005;

    let gt = DisparityMap::new(2, 2, vec![10.0, 11.0, 12.0, 13.0]).unwrap();
    let off = DisparityMap::new(2, 2, vec![10.0, 13.0, 12.0, 13.0]).unwrap();
    let alt = DisparityMap::new(2, 2, vec![11.0, 10.0, 13.0, 12.0]).unwrap();
    let exact = DisparityMap::new(2, 2, vec![11.0, 12.0, 13.0, 14.0]).unwrap();
    let with_hole = DisparityMap::new(2, 2, vec![INVALID_DISPARITY, 12.0, 12.0, 13.0]).unwrap();
    let mut identities = vec![
        pep(&gt, &gt, 1.0).unwrap() == 0.0,
        rmse(&gt, &gt).unwrap() == 0.0,
        pep(&off, &gt, 1.0).unwrap() == 25.0,
        pep(&exact, &gt, 1.0).unwrap() == 0.0,
        rmse(&alt, &gt).unwrap() == 1.0,
        pep(&with_hole, &gt, 0.5).unwrap() == 100.0 / 3.0,
        rmse(&with_hole, &gt).unwrap() == (1.0f64 / 3.0).sqrt(),
        pep(&DisparityMap::invalid(2, 2).unwrap(), &gt, 1.0).is_err(),
    ];

    let mut rng = ChaCha8Rng::seed_from_u64(0x8e7);
    for _ in 0..20 {
        let a = DisparityMap::from_fn(8, 8, |_, _| rng.random_range(0..40) as f64).unwrap();
        let b = DisparityMap::from_fn(8, 8, |_, _| rng.random_range(0..40) as f64).unwrap();
        let sq: f64 = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).powi(2))
            .sum();
        let r = rmse(&a, &b).unwrap();
        identities.push(r * r * 64.0 == sq || ((r * r * 64.0 - sq) / sq).abs() < 1e-12);
        let peps: Vec<f64> = [0.0, 1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|&e| pep(&a, &b, e).unwrap())
            .collect();
        identities.push(peps.windows(2).all(|p| p[1] <= p[0]));
    }
    let mask = LabelMap::new(3, 2, vec![0, 1, 1, 0, 2, 0]).unwrap();
    let same = pixel_metrics(&mask, &mask).unwrap();
    identities.push(same.fscore == 1.0 && same.accuracy == 1.0);
    let inst = instance_metrics(&mask, &mask, 0.5).unwrap();
    identities.push(inst.correct == 2 && inst.incorrect == 0 && inst.misdetection == 0);

    let failed = identities.iter().filter(|ok| !**ok).count();
    let pass = f_ok && failed == 0;
    report(
        8,
        pass,
        &format!(
            "F(0.8982, 0.8903) = {f:.4} (0.8942 +- 0.0005); {failed}/{} metric identities fail",
            identities.len()
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 9. Optional real-data check

fn dataset_frames(root: &Path) -> Vec<PathBuf> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .map(|it| {
            it.filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.join("left.png").is_file() && p.join("mask_gt.png").is_file())
                .collect()
        })
        .unwrap_or_default();
    dirs.sort();
    dirs
}

#[test]
fn criterion_9_public_dataset_accuracy() {
    let Some(root) = std::env::var_os("POTHOLE_DATASET_DIR").map(PathBuf::from) else {
        report(9, true, "skipped, POTHOLE_DATASET_DIR is not set");
        return;
    };
    let cfg = PipelineConfig::default();
    let frames = dataset_frames(&root);
    let mut metrics = Vec::new();
    let mut failures = 0;
    for dir in &frames {
        let left = io::load_gray_image(&dir.join("left.png")).unwrap();
        let right = io::load_gray_image(&dir.join("right.png")).unwrap();
        let gt = io::load_labels(&dir.join("mask_gt.png")).unwrap();
        let Ok(det) = run_detection(&left, &right, &cfg) else {
            failures += 1;
            continue;
        };
        let input = FrameInput {
            disparity: None,
            pred: &det.labels,
            gt: &gt,
            runtime_ms: None,
        };
        metrics.push(evaluate_frame(&dir.display().to_string(), input, &[], cfg.iou_min).unwrap());
    }
    let acc = Aggregate::from_frames(&metrics).pixel.accuracy;
    let pass = !frames.is_empty() && failures == 0 && acc >= 0.98;
    report(
        9,
        pass,
        &format!(
            "{} frames, {failures} failed, pixel accuracy {acc:.4} (>= 0.98)",
            frames.len()
        ),
    );
    assert!(pass);
}
