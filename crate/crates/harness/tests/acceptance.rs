//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the measured values. Run with
//! `cargo test -p orc-harness --test acceptance -- --nocapture`.

use std::path::Path;

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use orc_core::baselines::{self, build_supervised, Standardizer};
use orc_core::features::CorrelationWeights;
use orc_core::optics::{Dft2, PhaseFrame, CameraImage};
use orc_core::readout::{error_reduction, nrmse, train_ridge};
use orc_core::reservoir::{Reservoir, ReservoirConfig};
use orc_harness::config::ExperimentConfig;
use orc_harness::experiment::{run_synthetic_suite, run_with_frames};
use orc_harness::synthetic::synthetic_frame;

#[test]
fn criterion_error_reduction_reproduces_reported_values() {
    // Reported comparison pairs: (0.104, 0.558) and (0.236, 1.309).
    let er1 = error_reduction(0.104, 0.558).unwrap();
    assert!((er1 - 0.8136).abs() < 1e-4, "er1 = {er1}");
    let er2 = error_reduction(0.236, 1.309).unwrap();
    assert!((er2 - 0.8197).abs() < 1e-4, "er2 = {er2}");
    println!("[PASS] error reduction: ER(0.104, 0.558) = {er1:.6}, ER(0.236, 1.309) = {er2:.6}");
}

#[test]
fn criterion_nrmse_identities_hold_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..100 {
        let n = rng.random_range(2..200);
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 100.0 - 50.0).collect();
        if y.windows(2).all(|w| w[0] == w[1]) {
            continue; // constant draws are excluded by the metric's domain
        }
        assert_eq!(nrmse(&y, &y).unwrap(), 0.0, "trial {trial}");
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let mean_pred = vec![mean; y.len()];
        assert_eq!(nrmse(&y, &mean_pred).unwrap(), 1.0, "trial {trial}");
    }
    println!("[PASS] nrmse identities: nrmse(y,y) = 0 and nrmse(y, mean) = 1 exactly on 100 random vectors");
}

#[test]
fn criterion_propagation_conserves_power() {
    let grid = 400;
    let dft = Dft2::new(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let expected = (grid * grid) as f64;
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let phases = Array2::from_shape_fn((grid, grid), |_| {
            rng.random::<f64>() * std::f64::consts::TAU * (1.0 - 1e-12)
        });
        let frame = PhaseFrame::new(phases).unwrap();
        let total: f64 = dft.apply(&frame).iter().map(|z| z.norm_sqr()).sum();
        worst = worst.max(((total - expected) / expected).abs());
    }
    assert!(worst < 1e-6, "worst relative power error {worst}");
    println!("[PASS] power conservation: worst relative error {worst:.3e} over 100 frames at 400x400");
}

#[test]
fn criterion_fading_memory_erases_initial_state() {
    let config = ReservoirConfig::default(); // 400x400, defaults under test
    let cw = CorrelationWeights::ones(8);
    let mut from_zeros = Reservoir::init(config, &cw, 8).unwrap();
    let mut from_ones = Reservoir::init(config, &cw, 8).unwrap();
    from_ones
        .set_state(CameraImage::constant(config.geometry.grid, 1.0, config.bits).unwrap())
        .unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut max_after_washout = 0.0_f64;
    for step in 0..300 {
        let u: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
        let a = from_zeros.step(&u).unwrap();
        let b = from_ones.step(&u).unwrap();
        if step >= config.washout {
            let dist = (&a - &b).iter().map(|d| d * d).sum::<f64>().sqrt();
            max_after_washout = max_after_washout.max(dist);
        }
    }
    assert!(
        max_after_washout < 1e-3,
        "initial condition persists: {max_after_washout}"
    );
    println!(
        "[PASS] fading memory: max pooled-state distance {max_after_washout:.3e} after washout ({} steps driven)",
        300
    );
}

/// Brute-force normal equations with an appended bias column (unpenalized),
/// solved by Gauss-Jordan elimination with partial pivoting.
fn normal_equations_oracle(x: &Array2<f64>, y: &Array2<f64>, lambda: f64) -> Array2<f64> {
    let m = x.nrows();
    let n = x.ncols() + 1;
    let mut xa = Array2::ones((m, n));
    xa.slice_mut(ndarray::s![.., ..x.ncols()]).assign(x);
    let mut a = xa.t().dot(&xa);
    for i in 0..x.ncols() {
        a[[i, i]] += lambda;
    }
    let b = xa.t().dot(y);
    let h = b.ncols();
    let mut aug = Array2::zeros((n, n + h));
    aug.slice_mut(ndarray::s![.., ..n]).assign(&a);
    aug.slice_mut(ndarray::s![.., n..]).assign(&b);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                aug[[i, col]]
                    .abs()
                    .partial_cmp(&aug[[j, col]].abs())
                    .unwrap()
            })
            .unwrap();
        if pivot != col {
            for k in 0..n + h {
                let tmp = aug[[col, k]];
                aug[[col, k]] = aug[[pivot, k]];
                aug[[pivot, k]] = tmp;
            }
        }
        let p = aug[[col, col]];
        for row in 0..n {
            if row != col {
                let f = aug[[row, col]] / p;
                for k in 0..n + h {
                    aug[[row, k]] -= f * aug[[col, k]];
                }
            }
        }
    }
    Array2::from_shape_fn((n, h), |(i, j)| aug[[i, n + j]] / aug[[i, i]])
}

#[test]
fn criterion_readout_matches_brute_force_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0_f64;
    for trial in 0..20 {
        let m = rng.random_range(30..=100);
        let n = rng.random_range(2..=20);
        let lambda = [0.0, 1e-3, 0.1, 1.0][trial % 4];
        let x = Array2::from_shape_fn((m, n), |_| rng.random::<f64>() * 2.0 - 1.0);
        let y = Array2::from_shape_fn((m, 2), |_| rng.random::<f64>() * 2.0 - 1.0);
        let w = train_ridge(&x, &y, lambda).unwrap();
        let oracle = normal_equations_oracle(&x, &y, lambda);
        for (a, b) in w.w_out.iter().zip(oracle.iter()) {
            worst = worst.max((a - b).abs());
        }
    }
    assert!(worst < 1e-8, "worst deviation {worst}");
    println!("[PASS] readout oracle: max |W - W_oracle| = {worst:.3e} over 20 instances");
}

#[test]
fn criterion_baseline_brute_force_oracles() {
    // Lasso: single standardized feature shrinks by exactly the scalar
    // soft threshold of the OLS coefficient.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 60;
    let x = Array2::from_shape_fn((n, 1), |_| rng.random::<f64>());
    let mut y = Array2::zeros((n, 1));
    for r in 0..n {
        y[[r, 0]] = 3.0 * x[[r, 0]] + 0.05 * rng.random::<f64>();
    }
    let xs = Standardizer::fit(&x).transform(&x);
    let y_mean = y.column(0).sum() / n as f64;
    let c = xs
        .column(0)
        .iter()
        .zip(y.column(0).iter())
        .map(|(a, b)| a * (b - y_mean))
        .sum::<f64>()
        / n as f64;
    let lambda1 = 0.1;
    let model = baselines::fit(
        &baselines::ModelParams::Lasso { lambda1 },
        &x,
        &y,
    )
    .unwrap();
    let coef = match &model {
        baselines::FittedModel::ElasticNet(m) => m.coefficients()[[0, 0]],
        _ => unreachable!(),
    };
    let expected = c.signum() * (c.abs() - lambda1).max(0.0);
    assert!((coef - expected).abs() < 1e-7, "{coef} vs {expected}");

    // kNN: five points, k = 2, against exhaustive search.
    let xk = ndarray::array![[0.0, 0.1], [1.0, 0.2], [0.1, 1.3], [5.0, 5.1], [6.2, 6.0]];
    let yk = ndarray::array![[1.0], [2.0], [4.0], [8.0], [16.0]];
    let model = baselines::fit(&baselines::ModelParams::Knn { k: 2 }, &xk, &yk).unwrap();
    let queries = ndarray::array![[0.4, 0.1], [5.6, 5.4]];
    let got = model.predict(&queries).unwrap();
    let std = Standardizer::fit(&xk);
    let (xs, qs) = (std.transform(&xk), std.transform(&queries));
    for (qi, q) in qs.rows().into_iter().enumerate() {
        let mut dists: Vec<(f64, usize)> = xs
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                (
                    row.iter().zip(q.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
                    i,
                )
            })
            .collect();
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected = (yk[[dists[0].1, 0]] + yk[[dists[1].1, 0]]) / 2.0;
        assert_eq!(got[[qi, 0]], expected, "query {qi}");
    }

    // Tree: the depth-1 split of an 8-point step function lands exactly on
    // the boundary found by exhaustive search over all midpoints.
    let xt = Array2::from_shape_fn((8, 1), |(r, _)| r as f64 + 1.0);
    let yt = Array2::from_shape_fn((8, 1), |(r, _)| if r < 4 { 0.0 } else { 1.0 });
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..7 {
        let thr = (xt[[i, 0]] + xt[[i + 1, 0]]) / 2.0;
        let (l, r): (Vec<usize>, Vec<usize>) = (0..8).partition(|&j| xt[[j, 0]] <= thr);
        let sse = |rows: &Vec<usize>| {
            let mean = rows.iter().map(|&j| yt[[j, 0]]).sum::<f64>() / rows.len() as f64;
            rows.iter().map(|&j| (yt[[j, 0]] - mean) * (yt[[j, 0]] - mean)).sum::<f64>()
        };
        let cost = sse(&l) + sse(&r);
        if cost < best.0 {
            best = (cost, thr);
        }
    }
    let model = baselines::fit(
        &baselines::ModelParams::DecisionTree {
            max_depth: Some(1),
            min_leaf: 1,
        },
        &xt,
        &yt,
    )
    .unwrap();
    let preds = model.predict(&xt).unwrap();
    for r in 0..8 {
        assert_eq!(preds[[r, 0]], yt[[r, 0]]);
    }
    assert_eq!(best.1, 4.5);

    println!("[PASS] baseline oracles: lasso soft-threshold, exhaustive kNN, exhaustive tree split all match");
}

#[test]
fn criterion_multistep_design_widths() {
    let frame = synthetic_frame(3, 60);
    for (h, width) in [(1usize, 8usize), (4, 32), (10, 80)] {
        let set = build_supervised(&frame, h).unwrap();
        assert_eq!(set.x.ncols(), width, "h = {h}");
    }
    println!("[PASS] multi-step shapes: supervised widths 8/32/80 for h = 1/4/10");
}

#[test]
fn criterion_synthetic_end_to_end() {
    let dir = tempfile::tempdir().unwrap();

    // (a) Full suite at the default seed: weighted RC beats the
    // constant-mean predictor at h = 1.
    let outcome = run_synthetic_suite(42, &dir.path().join("full")).unwrap();
    assert!(outcome.report.failures.is_empty(), "{:?}", outcome.report.failures);
    let rc_cw_h1 = outcome.report.nrmse_of("SYNTH", 1, "rc_cw").unwrap();
    assert!(rc_cw_h1 < 1.0, "rc_cw h=1 NRMSE {rc_cw_h1}");
    for &h in &[1usize, 4, 10] {
        assert!(outcome.report.nrmse_of("SYNTH", h, "rc_cw").is_some());
        assert!(outcome.report.nrmse_of("SYNTH", h, "best_ml").is_some());
    }

    // (b) Correlation weighting helps in mean over 10 seeds at h = 1.
    let mut cw_scores = Vec::new();
    let mut plain_scores = Vec::new();
    for seed in 1..=10u64 {
        let mut cfg = ExperimentConfig {
            master_seed: seed,
            horizons: vec![1],
            out_dir: dir.path().join(format!("cw_{seed}")),
            ..ExperimentConfig::default()
        };
        cfg.baselines.families = vec![];
        let frame = synthetic_frame(seed, cfg.train_len + cfg.test_len);
        let out = run_with_frames(&cfg, &[("SYNTH".into(), frame)]).unwrap();
        cw_scores.push(out.report.nrmse_of("SYNTH", 1, "rc_cw").unwrap());
        plain_scores.push(out.report.nrmse_of("SYNTH", 1, "rc").unwrap());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mean_cw, mean_plain) = (mean(&cw_scores), mean(&plain_scores));
    assert!(
        mean_cw <= mean_plain,
        "CW did not help: {mean_cw} vs {mean_plain}"
    );

    // (c) Weighted RC at h = 1 beats the best linear baseline on the
    // nonlinear task.
    let mut cfg = ExperimentConfig {
        master_seed: 42,
        horizons: vec![1],
        out_dir: dir.path().join("linear"),
        ..ExperimentConfig::default()
    };
    cfg.baselines.families = vec![
        "ols".into(),
        "ridge".into(),
        "lasso".into(),
        "elasticnet".into(),
    ];
    let frame = synthetic_frame(42, cfg.train_len + cfg.test_len);
    let out = run_with_frames(&cfg, &[("SYNTH".into(), frame)]).unwrap();
    let rc = out.report.nrmse_of("SYNTH", 1, "rc_cw").unwrap();
    let best_linear = out.report.nrmse_of("SYNTH", 1, "best_ml").unwrap();
    assert!(
        rc <= best_linear,
        "rc_cw {rc} vs best linear {best_linear}"
    );

    println!(
        "[PASS] synthetic end-to-end: (a) rc_cw h=1 NRMSE {rc_cw_h1:.4} < 1; \
         (b) 10-seed mean {mean_cw:.4} (CW) <= {mean_plain:.4} (plain); \
         (c) rc_cw {rc:.4} <= best linear {best_linear:.4}"
    );
}

fn read_bytes(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn criterion_synthetic_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    run_synthetic_suite(42, &out_a).unwrap();
    run_synthetic_suite(42, &out_b).unwrap();

    let mut names = vec![
        "metrics.csv".to_string(),
        "error_reduction.csv".to_string(),
        "nrmse_steps.csv".to_string(),
        "run_meta.toml".to_string(),
    ];
    for h in [1usize, 4, 10] {
        names.push(format!("predictions_SYNTH_h{h}.csv"));
    }
    for name in &names {
        assert_eq!(
            read_bytes(&out_a.join(name)),
            read_bytes(&out_b.join(name)),
            "{name} differs between identical runs"
        );
    }
    println!(
        "[PASS] determinism: {} artifact files byte-identical across two seed-42 runs",
        names.len()
    );
}
