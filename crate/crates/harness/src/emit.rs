//! Artifact emission: prediction CSVs, the long-format metrics table, the
//! plot-ready error-reduction table, the run metadata stamp, and the
//! failure manifest. Floats print in Rust's shortest round-trip form, so
//! files parse back to bit-identical values and identical runs produce
//! byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::experiment::CellOutput;
use crate::report::MetricsReport;
use crate::synthetic::sanitize;

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "NA".to_string(),
    }
}

/// Prediction file path for one cell.
pub fn predictions_path(out_dir: &Path, ticker: &str, horizon: usize) -> PathBuf {
    out_dir.join(format!("predictions_{}_h{}.csv", sanitize(ticker), horizon))
}

/// Writes `date,horizon_step,true,rc_cw,rc,best_ml,best_ml_name`, one row
/// per test anchor per horizon step, prices in original units. Missing
/// baseline cells print `NA`. An empty cell yields a header-only file.
pub fn emit_predictions(cell: &CellOutput, out_dir: &Path) -> Result<()> {
    let path = predictions_path(out_dir, &cell.ticker, cell.horizon);
    let mut buf = String::from("date,horizon_step,true,rc_cw,rc,best_ml,best_ml_name\n");
    let (rows, h) = cell.y_true.dim();
    let name = cell
        .baseline
        .as_ref()
        .map(|b| b.family.clone())
        .unwrap_or_default();
    for i in 0..rows {
        for s in 0..h {
            let ml = cell.baseline.as_ref().map(|b| b.y_pred[[i, s]]);
            writeln!(
                &mut buf,
                "{},{},{},{},{},{},{}",
                cell.target_dates[i][s],
                s + 1,
                cell.y_true[[i, s]],
                cell.rc_cw.y_pred[[i, s]],
                cell.rc.y_pred[[i, s]],
                fmt_opt(ml),
                name
            )
            .expect("writing to string");
        }
    }
    std::fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Writes `metrics.csv` (long format), `error_reduction.csv` (one row per
/// ticker, one ER column per horizon), `nrmse_steps.csv` (per-step
/// diagnostics), `run_meta.toml`, and `failures.csv` when cells failed.
pub fn emit_metrics(report: &MetricsReport, out_dir: &Path, horizons: &[usize]) -> Result<()> {
    let mut metrics = String::from("ticker,horizon,model,model_detail,nrmse\n");
    for row in &report.rows {
        writeln!(
            &mut metrics,
            "{},{},{},{},{}",
            row.ticker,
            row.horizon,
            row.model,
            row.detail,
            fmt_opt(row.nrmse)
        )
        .expect("writing to string");
    }
    std::fs::write(out_dir.join("metrics.csv"), metrics)?;

    // Plot-ready ER table: ticker x horizons.
    let mut tickers: Vec<String> = Vec::new();
    for row in &report.er_rows {
        if !tickers.contains(&row.ticker) {
            tickers.push(row.ticker.clone());
        }
    }
    let mut er = String::from("ticker");
    for h in horizons {
        write!(&mut er, ",er_h{h}").expect("writing to string");
    }
    er.push('\n');
    for ticker in &tickers {
        write!(&mut er, "{ticker}").expect("writing to string");
        for &h in horizons {
            let cell = report
                .er_rows
                .iter()
                .find(|r| &r.ticker == ticker && r.horizon == h)
                .and_then(|r| r.er);
            write!(&mut er, ",{}", fmt_opt(cell)).expect("writing to string");
        }
        er.push('\n');
    }
    std::fs::write(out_dir.join("error_reduction.csv"), er)?;

    let mut steps = String::from("ticker,horizon,model,step,nrmse\n");
    for row in &report.step_rows {
        writeln!(
            &mut steps,
            "{},{},{},{},{}",
            row.ticker, row.horizon, row.model, row.step, row.nrmse
        )
        .expect("writing to string");
    }
    std::fs::write(out_dir.join("nrmse_steps.csv"), steps)?;

    let meta = format!(
        "config_fingerprint = \"{}\"\nmaster_seed = {}\n",
        report.fingerprint, report.master_seed
    );
    std::fs::write(out_dir.join("run_meta.toml"), meta)?;

    if !report.failures.is_empty() {
        let mut failures = String::from("ticker,horizon,error\n");
        for f in &report.failures {
            writeln!(
                &mut failures,
                "{},{},{:?}",
                f.ticker, f.horizon, f.error
            )
            .expect("writing to string");
        }
        std::fs::write(out_dir.join("failures.csv"), failures)?;
    }
    Ok(())
}
