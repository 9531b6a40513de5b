//! End-to-end harness tests on desk-scale configurations: run-matrix
//! counting, emission formats, determinism, and the train/test leakage
//! audit.

use std::path::Path;

use ndarray::Array2;

use orc_core::readout::ReadoutWeights;
use orc_harness::config::ExperimentConfig;
use orc_harness::emit::{emit_metrics, emit_predictions, predictions_path};
use orc_harness::experiment::{run_cell, run_with_frames, CellOutput, RcRunOutput};
use orc_harness::report::{ErRow, MetricsReport, NrmseRow};
use orc_harness::synthetic::{synthetic_frame, write_sample_data};

/// Small, fast configuration: 40x40 modulator, 16 pooled nodes.
fn small_config(out_dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        out_dir: out_dir.to_path_buf(),
        train_len: 150,
        test_len: 40,
        folds: 3,
        ..ExperimentConfig::default()
    };
    cfg.reservoir.grid = 40;
    cfg.reservoir.block = 4;
    cfg.reservoir.nodes = 16;
    cfg.reservoir.washout = 15;
    // Keep the baseline grid small so the matrix of cells stays quick.
    cfg.baselines.families = vec!["ols".into(), "ridge".into(), "knn".into()];
    cfg.baselines.ridge_lambdas = vec![1e-2, 1.0];
    cfg.baselines.knn_k = vec![5];
    cfg
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn report_counts_match_run_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(&dir.path().join("out"));
    cfg.horizons = vec![1, 4, 10];

    let frames = vec![
        ("SYNA".to_string(), synthetic_frame(1, 190)),
        ("SYNB".to_string(), synthetic_frame(2, 190)),
    ];
    let outcome = run_with_frames(&cfg, &frames).unwrap();
    assert!(outcome.report.failures.is_empty());

    // 2 tickers x 3 horizons x (2 RC modes + best ML).
    assert_eq!(outcome.report.rows.len(), 2 * 3 * 3);
    assert_eq!(outcome.report.er_rows.len(), 2 * 3);
    assert!(outcome
        .report
        .rows
        .iter()
        .all(|r| r.nrmse.is_some() && r.nrmse.unwrap().is_finite()));

    // Per-cell prediction files exist with anchors x horizon rows.
    for ticker in ["SYNA", "SYNB"] {
        for &h in &cfg.horizons {
            let text = read(&predictions_path(&cfg.out_dir, ticker, h));
            let rows = text.lines().count() - 1;
            let anchors = cfg.test_len - (h - 1);
            assert_eq!(rows, anchors * h, "{ticker} h={h}");
        }
    }
}

#[test]
fn single_horizon_config_emits_nothing_else() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(&dir.path().join("out"));
    cfg.horizons = vec![1];
    cfg.baselines.families = vec![];

    let frames = vec![("SYNA".to_string(), synthetic_frame(3, 190))];
    let outcome = run_with_frames(&cfg, &frames).unwrap();
    assert_eq!(outcome.report.rows.len(), 3); // rc_cw, rc, best_ml(NA)
    assert!(outcome.report.nrmse_of("SYNA", 1, "best_ml").is_none());

    let er = read(&cfg.out_dir.join("error_reduction.csv"));
    assert_eq!(er.lines().next().unwrap(), "ticker,er_h1");
    assert!(er.lines().nth(1).unwrap().starts_with("SYNA,NA"));

    assert!(predictions_path(&cfg.out_dir, "SYNA", 1).is_file());
    assert!(!predictions_path(&cfg.out_dir, "SYNA", 4).is_file());
    assert!(!predictions_path(&cfg.out_dir, "SYNA", 10).is_file());
}

#[test]
fn same_seed_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &Path| {
        let mut cfg = small_config(out);
        cfg.horizons = vec![1, 4];
        let frames = vec![("SYNA".to_string(), synthetic_frame(5, 190))];
        run_with_frames(&cfg, &frames).unwrap();
    };
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    run(&out_a);
    run(&out_b);
    for name in ["metrics.csv", "error_reduction.csv", "nrmse_steps.csv", "run_meta.toml"] {
        assert_eq!(
            std::fs::read(out_a.join(name)).unwrap(),
            std::fs::read(out_b.join(name)).unwrap(),
            "{name} differs"
        );
    }
    for h in [1usize, 4] {
        assert_eq!(
            std::fs::read(predictions_path(&out_a, "SYNA", h)).unwrap(),
            std::fs::read(predictions_path(&out_b, "SYNA", h)).unwrap()
        );
    }
}

fn dummy_rc(y_pred: Array2<f64>) -> RcRunOutput {
    RcRunOutput {
        weights: ReadoutWeights {
            w_out: Array2::zeros((1, y_pred.ncols())),
            ridge_lambda: 0.0,
        },
        lambda: 0.0,
        val_nrmse: 0.0,
        train_state_checksum: 0.0,
        nrmse: 0.5,
        per_step: vec![0.5; y_pred.ncols()],
        y_pred,
    }
}

fn dummy_cell(anchors: usize, horizon: usize) -> CellOutput {
    let base = chrono::NaiveDate::from_ymd_opt(2023, 1, 2).unwrap();
    let y = Array2::from_shape_fn((anchors, horizon), |(i, s)| 100.0 + (i + s) as f64);
    CellOutput {
        ticker: "TEST".into(),
        horizon,
        normalizer: {
            let frame = synthetic_frame(1, 30);
            orc_core::ingest::Normalizer::fit(&frame).unwrap()
        },
        cw: orc_core::features::CorrelationWeights::ones(8),
        anchor_dates: (0..anchors)
            .map(|i| base + chrono::Days::new(i as u64))
            .collect(),
        target_dates: (0..anchors)
            .map(|i| {
                (1..=horizon)
                    .map(|s| base + chrono::Days::new((i + s) as u64))
                    .collect()
            })
            .collect(),
        y_true: y.clone(),
        rc_cw: dummy_rc(y.mapv(|v| v + 0.5)),
        rc: dummy_rc(y.mapv(|v| v + 0.7)),
        baseline: None,
        er: None,
    }
}

#[test]
fn prediction_rows_are_anchors_times_horizon() {
    let dir = tempfile::tempdir().unwrap();

    let cell = dummy_cell(100, 1);
    emit_predictions(&cell, dir.path()).unwrap();
    let text = read(&predictions_path(dir.path(), "TEST", 1));
    assert_eq!(text.lines().count(), 1 + 100);

    let cell = dummy_cell(100, 4);
    emit_predictions(&cell, dir.path()).unwrap();
    let text = read(&predictions_path(dir.path(), "TEST", 4));
    assert_eq!(text.lines().count(), 1 + 400);
    assert_eq!(
        text.lines().next().unwrap(),
        "date,horizon_step,true,rc_cw,rc,best_ml,best_ml_name"
    );
    // Missing baseline prints NA, never a silent omission.
    assert!(text.lines().nth(1).unwrap().ends_with(",NA,"));

    let cell = dummy_cell(0, 2);
    emit_predictions(&cell, dir.path()).unwrap();
    let text = read(&predictions_path(dir.path(), "TEST", 2));
    assert_eq!(
        text,
        "date,horizon_step,true,rc_cw,rc,best_ml,best_ml_name\n"
    );
}

#[test]
fn metrics_emission_round_trips_and_er_is_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let mut report = MetricsReport::new("fingerprint".into(), 42);
    let push = |report: &mut MetricsReport, ticker: &str, model: &str, v: Option<f64>| {
        report.rows.push(NrmseRow {
            ticker: ticker.into(),
            horizon: 1,
            model: model.into(),
            detail: String::new(),
            nrmse: v,
        });
    };
    // Reported pair from the reference comparison: ER must land at 0.8136.
    push(&mut report, "AAA", "rc_cw", Some(0.104));
    push(&mut report, "AAA", "rc", Some(0.108));
    push(&mut report, "AAA", "best_ml", Some(0.558));
    report.er_rows.push(ErRow {
        ticker: "AAA".into(),
        horizon: 1,
        er: Some(orc_core::readout::error_reduction(0.104, 0.558).unwrap()),
        best_ml: "lasso".into(),
    });
    // Equal errors: zero reduction.
    push(&mut report, "BBB", "rc_cw", Some(0.3));
    push(&mut report, "BBB", "rc", Some(0.3));
    push(&mut report, "BBB", "best_ml", Some(0.3));
    report.er_rows.push(ErRow {
        ticker: "BBB".into(),
        horizon: 1,
        er: Some(orc_core::readout::error_reduction(0.3, 0.3).unwrap()),
        best_ml: "ols".into(),
    });
    // Missing baseline: explicit NA.
    push(&mut report, "CCC", "rc_cw", Some(0.4));
    push(&mut report, "CCC", "rc", Some(0.5));
    push(&mut report, "CCC", "best_ml", None);
    report.er_rows.push(ErRow {
        ticker: "CCC".into(),
        horizon: 1,
        er: None,
        best_ml: String::new(),
    });

    assert_eq!(report.max_er_inconsistency(), 0.0);
    emit_metrics(&report, dir.path(), &[1]).unwrap();

    let er_text = read(&dir.path().join("error_reduction.csv"));
    let lines: Vec<&str> = er_text.lines().collect();
    assert_eq!(lines[0], "ticker,er_h1");
    let aaa: f64 = lines[1].strip_prefix("AAA,").unwrap().parse().unwrap();
    assert!((aaa - 0.8136).abs() < 1e-4);
    assert_eq!(lines[2], "BBB,0");
    assert_eq!(lines[3], "CCC,NA");

    // Round-trip: parse metrics.csv and rebuild the rows exactly.
    let mut rdr = csv::Reader::from_path(dir.path().join("metrics.csv")).unwrap();
    let mut parsed = Vec::new();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        parsed.push(NrmseRow {
            ticker: rec[0].to_string(),
            horizon: rec[1].parse().unwrap(),
            model: rec[2].to_string(),
            detail: rec[3].to_string(),
            nrmse: match &rec[4] {
                "NA" => None,
                v => Some(v.parse().unwrap()),
            },
        });
    }
    assert_eq!(parsed, report.rows);

    let meta = read(&dir.path().join("run_meta.toml"));
    assert!(meta.contains("config_fingerprint = \"fingerprint\""));
    assert!(meta.contains("master_seed = 42"));
}

#[test]
fn poisoned_test_slice_leaves_training_artifacts_untouched() {
    let mut cfg = small_config(Path::new("unused"));
    cfg.horizons = vec![1];
    cfg.baselines.families = vec!["ols".into(), "knn".into()];

    let frame = synthetic_frame(7, 190);
    let mut poisoned = frame.clone();
    for r in cfg.train_len..poisoned.len() {
        for c in 0..poisoned.inputs.ncols() {
            poisoned.inputs[[r, c]] = poisoned.inputs[[r, c]] * 13.7 + 100.0;
        }
        poisoned.target[r] = poisoned.target[r] * 13.7 + 100.0;
    }

    let clean = run_cell(&frame, "SYNA", 1, &cfg).unwrap();
    let dirty = run_cell(&poisoned, "SYNA", 1, &cfg).unwrap();

    // Everything fitted on the training side must be bitwise identical.
    assert_eq!(clean.normalizer, dirty.normalizer);
    assert_eq!(clean.cw, dirty.cw);
    assert_eq!(clean.rc_cw.train_state_checksum, dirty.rc_cw.train_state_checksum);
    assert_eq!(clean.rc.train_state_checksum, dirty.rc.train_state_checksum);
    assert_eq!(clean.rc_cw.weights.w_out, dirty.rc_cw.weights.w_out);
    assert_eq!(clean.rc.weights.w_out, dirty.rc.weights.w_out);
    let (cb, db) = (clean.baseline.unwrap(), dirty.baseline.unwrap());
    assert_eq!(cb.family, db.family);
    assert_eq!(cb.params, db.params);
    assert_eq!(cb.cv_nrmse, db.cv_nrmse);

    // The poison must actually reach the test-side outputs.
    assert_ne!(clean.rc_cw.nrmse, dirty.rc_cw.nrmse);
}

#[test]
fn sample_data_pipeline_runs_from_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    let data_dir = dir.path().join("data");
    write_sample_data(&data_dir, &["SYNA".into()], 230, 11).unwrap();

    let mut cfg = small_config(&dir.path().join("out"));
    cfg.horizons = vec![1];
    cfg.data.vix = data_dir.join("vix.csv");
    cfg.data.effr = data_dir.join("effr.csv");
    cfg.data.umcsent = data_dir.join("umcsent.csv");
    cfg.data.dxynyb = data_dir.join("dxynyb.csv");
    cfg.data.tickers = vec![orc_harness::config::TickerSource {
        name: "SYNA".into(),
        path: data_dir.join("SYNA.csv"),
    }];

    let outcome = orc_harness::run_experiment(&cfg).unwrap();
    assert!(outcome.report.failures.is_empty(), "{:?}", outcome.report.failures);
    assert_eq!(outcome.report.rows.len(), 3);
    assert!(cfg.out_dir.join("metrics.csv").is_file());
}
