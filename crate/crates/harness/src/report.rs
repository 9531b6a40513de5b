//! In-memory metrics report collected across experiment cells.

use orc_core::readout::error_reduction;

/// One pooled-NRMSE entry. `model` is `rc_cw`, `rc`, or `best_ml`;
/// `detail` carries the winning family for `best_ml`.
#[derive(Debug, Clone, PartialEq)]
pub struct NrmseRow {
    pub ticker: String,
    pub horizon: usize,
    pub model: String,
    pub detail: String,
    pub nrmse: Option<f64>,
}

/// Error reduction of the weighted reservoir against the best baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct ErRow {
    pub ticker: String,
    pub horizon: usize,
    pub er: Option<f64>,
    pub best_ml: String,
}

/// Per-step diagnostic NRMSE for a multi-step model.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRow {
    pub ticker: String,
    pub horizon: usize,
    pub model: String,
    pub step: usize,
    pub nrmse: f64,
}

/// A cell that could not be completed, kept for the failure manifest.
#[derive(Debug, Clone)]
pub struct FailureRow {
    pub ticker: String,
    pub horizon: usize,
    pub error: String,
}

/// Full report for one experiment run.
#[derive(Debug, Clone, Default)]
pub struct MetricsReport {
    pub rows: Vec<NrmseRow>,
    pub er_rows: Vec<ErRow>,
    pub step_rows: Vec<StepRow>,
    pub failures: Vec<FailureRow>,
    pub fingerprint: String,
    pub master_seed: u64,
}

impl MetricsReport {
    pub fn new(fingerprint: String, master_seed: u64) -> Self {
        MetricsReport {
            fingerprint,
            master_seed,
            ..Default::default()
        }
    }

    pub fn add_failure(&mut self, ticker: &str, horizon: usize, error: String) {
        self.failures.push(FailureRow {
            ticker: ticker.to_string(),
            horizon,
            error,
        });
    }

    pub fn nrmse_of(&self, ticker: &str, horizon: usize, model: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.ticker == ticker && r.horizon == horizon && r.model == model)
            .and_then(|r| r.nrmse)
    }

    pub fn er_of(&self, ticker: &str, horizon: usize) -> Option<f64> {
        self.er_rows
            .iter()
            .find(|r| r.ticker == ticker && r.horizon == horizon)
            .and_then(|r| r.er)
    }

    /// Recomputes every stored error-reduction entry from the stored
    /// NRMSEs and returns the largest absolute deviation. Internal
    /// consistency means this is 0 up to float reproduction.
    pub fn max_er_inconsistency(&self) -> f64 {
        let mut worst = 0.0_f64;
        for er_row in &self.er_rows {
            let (Some(er), Some(rc), Some(ml)) = (
                er_row.er,
                self.nrmse_of(&er_row.ticker, er_row.horizon, "rc_cw"),
                self.nrmse_of(&er_row.ticker, er_row.horizon, "best_ml"),
            ) else {
                continue;
            };
            if let Ok(expected) = error_reduction(rc, ml) {
                worst = worst.max((er - expected).abs());
            }
        }
        worst
    }
}
