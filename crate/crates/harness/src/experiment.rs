//! Experiment orchestration: builds datasets, runs the reservoir with and
//! without correlation weights plus the baseline suite per ticker and
//! horizon, scores everything in price units, and hands artifacts to the
//! emitters.
//!
//! Data flow per cell: the working window (train + test rows) is split
//! chronologically; the normalizer and correlation weights are fitted on
//! the training slice only. The reservoir is driven over every anchor in
//! order (training anchors first, so test-anchor states never influence
//! training artifacts), the readout trains on post-washout training
//! states, and baselines train on the same supervised rows.

use std::path::Path;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use ndarray::{Array2, Axis};

use orc_core::baselines::{build_supervised, select_best_model, SupervisedSet};
use orc_core::features::{correlation_weights, correlation_weights_signed, CorrelationWeights};
use orc_core::ingest::{
    align_and_join, load_macro_csv, load_ohlc_csv, split, FeatureFrame, Normalizer,
};
use orc_core::readout::{
    error_reduction, nrmse_multistep, nrmse_per_step, predict, train_ridge_cv, PredictionResult,
    ReadoutWeights,
};
use orc_core::reservoir::Reservoir;
use orc_core::{features, Error as CoreError};

use crate::config::{derive_seed, DataSources, ExperimentConfig, TickerSource};
use crate::emit;
use crate::report::{ErRow, MetricsReport, NrmseRow, StepRow};
use crate::synthetic::synthetic_frame;

/// One reservoir mode's artifacts for a cell.
#[derive(Debug, Clone)]
pub struct RcRunOutput {
    pub weights: ReadoutWeights,
    pub lambda: f64,
    pub val_nrmse: f64,
    /// Sum over the training state matrix; a cheap witness that training
    /// states were untouched by anything test-side.
    pub train_state_checksum: f64,
    pub nrmse: f64,
    pub per_step: Vec<f64>,
    pub y_pred: Array2<f64>,
}

/// Winning baseline artifacts for a cell.
#[derive(Debug, Clone)]
pub struct BaselineOutput {
    pub family: String,
    pub params: String,
    pub cv_nrmse: f64,
    pub nrmse: f64,
    pub per_step: Vec<f64>,
    pub y_pred: Array2<f64>,
}

/// Everything produced for one (ticker, horizon) cell.
#[derive(Debug, Clone)]
pub struct CellOutput {
    pub ticker: String,
    pub horizon: usize,
    pub normalizer: Normalizer,
    pub cw: CorrelationWeights,
    pub anchor_dates: Vec<NaiveDate>,
    pub target_dates: Vec<Vec<NaiveDate>>,
    /// Test targets in price units.
    pub y_true: Array2<f64>,
    pub rc_cw: RcRunOutput,
    pub rc: RcRunOutput,
    pub baseline: Option<BaselineOutput>,
    pub er: Option<f64>,
}

impl CellOutput {
    /// Packages one model's test predictions as a standalone result in
    /// price units. `model` is `rc_cw`, `rc`, or `best_ml`.
    pub fn prediction_result(&self, model: &str) -> Result<PredictionResult> {
        let y_pred = match model {
            "rc_cw" => self.rc_cw.y_pred.clone(),
            "rc" => self.rc.y_pred.clone(),
            "best_ml" => match &self.baseline {
                Some(b) => b.y_pred.clone(),
                None => bail!("no baseline was fitted for this cell"),
            },
            other => bail!("unknown model {other:?}"),
        };
        Ok(PredictionResult::new(
            self.anchor_dates.clone(),
            self.target_dates.clone(),
            self.y_true.clone(),
            y_pred,
        )?)
    }
}

/// Loads and joins one ticker's frame from CSV files.
pub fn prepare_frame(ticker: &TickerSource, data: &DataSources) -> Result<FeatureFrame> {
    let ohlc = load_ohlc_csv(&ticker.path)
        .with_context(|| format!("loading OHLC for {}", ticker.name))?;
    let macros = vec![
        load_macro_csv(&data.vix, "VIX")?,
        load_macro_csv(&data.effr, "EFFR")?,
        load_macro_csv(&data.umcsent, "UMCSENT")?,
        load_macro_csv(&data.dxynyb, "DXYNYB")?,
    ];
    let indicators = features::indicator_columns(&ohlc)?;
    let frame = align_and_join(&ohlc, &macros, &indicators)
        .with_context(|| format!("joining features for {}", ticker.name))?;
    Ok(frame)
}

fn select_rows(m: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    m.select(Axis(0), rows)
}

/// Runs the full cell: normalization, correlation weights, both reservoir
/// modes, baseline selection, and price-unit scoring.
pub fn run_cell(
    frame: &FeatureFrame,
    ticker: &str,
    horizon: usize,
    config: &ExperimentConfig,
) -> Result<CellOutput> {
    let train_len = config.train_len;
    let total = train_len + config.test_len;
    let (train_frame, _) = split(frame, train_len, config.test_len)?;
    let working = frame.slice_rows(0, total);

    let normalizer = Normalizer::fit(&train_frame)?;
    let norm_working = normalizer.transform(&working);
    let norm_train = norm_working.slice_rows(0, train_len);
    let cw = if config.cw_signed {
        correlation_weights_signed(&norm_train)?
    } else {
        correlation_weights(&norm_train)?
    };

    let supervised = build_supervised(&norm_working, horizon)?;
    let mut train_rows = Vec::new();
    let mut test_rows = Vec::new();
    for (i, &anchor) in supervised.anchor_rows.iter().enumerate() {
        if anchor + horizon < train_len {
            train_rows.push(i);
        } else if anchor + 1 >= train_len {
            test_rows.push(i);
        }
        // Anchors whose target window straddles the boundary drive the
        // reservoir but train and score nothing.
    }
    let washout = config.reservoir.washout;
    if train_rows.len() < washout + 4 {
        bail!(
            "{} training anchors cannot absorb washout {washout}",
            train_rows.len()
        );
    }
    if test_rows.is_empty() {
        bail!("no test anchors for horizon {horizon}");
    }

    // Test targets and dates in price units, straight from the raw frame.
    let y_true = Array2::from_shape_fn((test_rows.len(), horizon), |(i, s)| {
        working.target[supervised.anchor_rows[test_rows[i]] + 1 + s]
    });
    let anchor_dates: Vec<NaiveDate> = test_rows
        .iter()
        .map(|&i| supervised.anchors[i])
        .collect();
    let target_dates: Vec<Vec<NaiveDate>> = test_rows
        .iter()
        .map(|&i| {
            let anchor = supervised.anchor_rows[i];
            (1..=horizon).map(|s| working.dates[anchor + s]).collect()
        })
        .collect();

    let rc_cw = run_rc_mode(
        "rc_cw", &cw, &supervised, &train_rows, &test_rows, &y_true, &normalizer, ticker,
        horizon, config,
    )?;
    let unit = CorrelationWeights::ones(cw.len());
    let rc = run_rc_mode(
        "rc", &unit, &supervised, &train_rows, &test_rows, &y_true, &normalizer, ticker,
        horizon, config,
    )?;

    let baseline = if config.baselines.families.is_empty() {
        None
    } else {
        match run_baselines(
            &supervised,
            &train_rows,
            &test_rows,
            &y_true,
            &normalizer,
            ticker,
            horizon,
            config,
        ) {
            Ok(b) => Some(b),
            Err(e) => {
                log::warn!("baseline selection failed for {ticker} h={horizon}: {e:#}");
                None
            }
        }
    };

    let er = baseline
        .as_ref()
        .and_then(|b| error_reduction(rc_cw.nrmse, b.nrmse).ok());

    Ok(CellOutput {
        ticker: ticker.to_string(),
        horizon,
        normalizer,
        cw,
        anchor_dates,
        target_dates,
        y_true,
        rc_cw,
        rc,
        baseline,
        er,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_rc_mode(
    mode: &str,
    weights: &CorrelationWeights,
    supervised: &SupervisedSet,
    train_rows: &[usize],
    test_rows: &[usize],
    y_true: &Array2<f64>,
    normalizer: &Normalizer,
    ticker: &str,
    horizon: usize,
    config: &ExperimentConfig,
) -> Result<RcRunOutput> {
    let seed = derive_seed(config.master_seed, ticker, horizon, mode);
    let rc_config = config.reservoir.to_reservoir_config(seed)?;
    let mut reservoir = Reservoir::init(rc_config, weights, supervised.x.ncols())?;
    let states = reservoir.run_collect(&supervised.x, 0)?;

    let readout_rows = &train_rows[config.reservoir.washout..];
    let x_train = select_rows(&states.states, readout_rows);
    let y_train = select_rows(&supervised.y, readout_rows);
    let cv = train_ridge_cv(
        &x_train,
        &y_train,
        &config.readout.lambdas,
        config.readout.val_fraction,
    )?;

    let x_test = select_rows(&states.states, test_rows);
    let pred_norm = predict(&cv.weights, &x_test)?;
    let y_pred = normalizer.invert_target(&pred_norm);
    let nrmse = nrmse_multistep(y_true, &y_pred)?;
    let per_step = nrmse_per_step(y_true, &y_pred)?;

    Ok(RcRunOutput {
        weights: cv.weights,
        lambda: cv.lambda,
        val_nrmse: cv.val_nrmse,
        train_state_checksum: x_train.sum(),
        nrmse,
        per_step,
        y_pred,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_baselines(
    supervised: &SupervisedSet,
    train_rows: &[usize],
    test_rows: &[usize],
    y_true: &Array2<f64>,
    normalizer: &Normalizer,
    ticker: &str,
    horizon: usize,
    config: &ExperimentConfig,
) -> Result<BaselineOutput> {
    let forest_seed = derive_seed(config.master_seed, ticker, horizon, "forest");
    let specs = config.baselines.to_specs(forest_seed)?;
    let train_set = supervised.subset(train_rows);
    let selected = select_best_model(&specs, &train_set, config.folds)?;

    let x_test = select_rows(&supervised.x, test_rows);
    let pred_norm = selected.model.predict(&x_test)?;
    let y_pred = normalizer.invert_target(&pred_norm);
    let nrmse = nrmse_multistep(y_true, &y_pred)?;
    let per_step = nrmse_per_step(y_true, &y_pred)?;

    Ok(BaselineOutput {
        family: selected.family.name().to_string(),
        params: selected.params.describe(),
        cv_nrmse: selected.cv_nrmse,
        nrmse,
        per_step,
        y_pred,
    })
}

impl MetricsReport {
    pub fn add_cell(&mut self, cell: &CellOutput) {
        let push_steps = |rows: &mut Vec<StepRow>, model: &str, per_step: &[f64]| {
            for (i, &v) in per_step.iter().enumerate() {
                rows.push(StepRow {
                    ticker: cell.ticker.clone(),
                    horizon: cell.horizon,
                    model: model.to_string(),
                    step: i + 1,
                    nrmse: v,
                });
            }
        };
        self.rows.push(NrmseRow {
            ticker: cell.ticker.clone(),
            horizon: cell.horizon,
            model: "rc_cw".into(),
            detail: format!("lambda={}", cell.rc_cw.lambda),
            nrmse: Some(cell.rc_cw.nrmse),
        });
        push_steps(&mut self.step_rows, "rc_cw", &cell.rc_cw.per_step);
        self.rows.push(NrmseRow {
            ticker: cell.ticker.clone(),
            horizon: cell.horizon,
            model: "rc".into(),
            detail: format!("lambda={}", cell.rc.lambda),
            nrmse: Some(cell.rc.nrmse),
        });
        push_steps(&mut self.step_rows, "rc", &cell.rc.per_step);
        match &cell.baseline {
            Some(b) => {
                self.rows.push(NrmseRow {
                    ticker: cell.ticker.clone(),
                    horizon: cell.horizon,
                    model: "best_ml".into(),
                    detail: b.family.clone(),
                    nrmse: Some(b.nrmse),
                });
                push_steps(&mut self.step_rows, "best_ml", &b.per_step);
            }
            None => self.rows.push(NrmseRow {
                ticker: cell.ticker.clone(),
                horizon: cell.horizon,
                model: "best_ml".into(),
                detail: String::new(),
                nrmse: None,
            }),
        }
        self.er_rows.push(ErRow {
            ticker: cell.ticker.clone(),
            horizon: cell.horizon,
            er: cell.er,
            best_ml: cell
                .baseline
                .as_ref()
                .map(|b| b.family.clone())
                .unwrap_or_default(),
        });
    }
}

/// Outcome of a full run: the report plus per-cell artifacts.
pub struct ExperimentOutcome {
    pub report: MetricsReport,
    pub cells: Vec<CellOutput>,
}

/// Runs the experiment over pre-built frames (one per ticker), writing
/// prediction files, metrics, and the failure manifest into the output
/// directory. Cell failures are recorded and do not abort the run.
pub fn run_with_frames(
    config: &ExperimentConfig,
    frames: &[(String, FeatureFrame)],
) -> Result<ExperimentOutcome> {
    std::fs::create_dir_all(&config.out_dir)
        .with_context(|| format!("creating output dir {}", config.out_dir.display()))?;
    let mut report = MetricsReport::new(config.fingerprint(), config.master_seed);
    let mut cells = Vec::new();

    for (ticker, frame) in frames {
        for &horizon in &config.horizons {
            match run_cell(frame, ticker, horizon, config) {
                Ok(cell) => {
                    emit::emit_predictions(&cell, &config.out_dir)?;
                    report.add_cell(&cell);
                    cells.push(cell);
                }
                Err(e) => {
                    log::error!("cell {ticker} h={horizon} failed: {e:#}");
                    report.add_failure(ticker, horizon, format!("{e:#}"));
                }
            }
        }
    }

    emit::emit_metrics(&report, &config.out_dir, &config.horizons)?;
    Ok(ExperimentOutcome { report, cells })
}

/// Loads every configured ticker from CSV and runs the experiment.
/// Frame-loading failures are recorded per ticker in the failure manifest.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.check_files()?;
    std::fs::create_dir_all(&config.out_dir)?;
    let mut frames = Vec::new();
    let mut load_failures = Vec::new();
    for ticker in &config.data.tickers {
        match prepare_frame(ticker, &config.data) {
            Ok(frame) => frames.push((ticker.name.clone(), frame)),
            Err(e) => {
                log::error!("loading {} failed: {e:#}", ticker.name);
                load_failures.push((ticker.name.clone(), format!("{e:#}")));
            }
        }
    }
    let mut outcome = run_with_frames(config, &frames)?;
    for (ticker, error) in load_failures {
        for &h in &config.horizons {
            outcome.report.add_failure(&ticker, h, error.clone());
        }
    }
    if !outcome.report.failures.is_empty() {
        emit::emit_metrics(&outcome.report, &config.out_dir, &config.horizons)?;
    }
    Ok(outcome)
}

/// Synthetic end-to-end run: generates the nonlinear autoregressive task
/// (600 points by default configuration) and executes the full pipeline at
/// horizons 1/4/10, writing artifacts into `out_dir`.
pub fn run_synthetic_suite(seed: u64, out_dir: &Path) -> Result<ExperimentOutcome> {
    let config = ExperimentConfig {
        master_seed: seed,
        out_dir: out_dir.to_path_buf(),
        ..ExperimentConfig::default()
    };
    let frame = synthetic_frame(seed, config.train_len + config.test_len);
    run_with_frames(&config, &[("SYNTH".to_string(), frame)])
}

/// Error type passthrough so harness callers can match on core errors.
pub fn as_core_error(e: &anyhow::Error) -> Option<&CoreError> {
    e.downcast_ref::<CoreError>()
}
