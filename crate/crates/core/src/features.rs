//! Technical indicators and feature/target correlation weights.
//!
//! Indicator conventions: MACD = EMA(12) − EMA(26) with 26 warm-up rows,
//! ATR and RSI use Wilder smoothing with period 14. Warm-up entries are
//! `NaN`; downstream alignment drops them.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::ingest::{FeatureFrame, IndicatorColumns, OhlcSeries, INPUT_COLUMNS, N_INPUTS};

pub const MACD_FAST: usize = 12;
pub const MACD_SLOW: usize = 26;
pub const ATR_PERIOD: usize = 14;
pub const RSI_PERIOD: usize = 14;

/// Rows a default indicator set needs before every column is defined.
pub const INDICATOR_WARMUP: usize = MACD_SLOW;

/// Exponential moving average seeded with the simple mean of the first
/// `period` values; smoothing factor 2/(period+1). The first `period − 1`
/// entries are `NaN` warm-up.
pub fn ema(series: &[f64], period: usize) -> Result<Vec<f64>> {
    if period == 0 {
        return Err(Error::Config("ema period must be >= 1".into()));
    }
    if series.len() < period {
        return Err(Error::Length {
            what: "ema input".into(),
            required: period,
            available: series.len(),
        });
    }
    let k = 2.0 / (period as f64 + 1.0);
    let mut out = vec![f64::NAN; series.len()];
    let seed = series[..period].iter().sum::<f64>() / period as f64;
    out[period - 1] = seed;
    for t in period..series.len() {
        out[t] = k * series[t] + (1.0 - k) * out[t - 1];
    }
    Ok(out)
}

/// Moving average convergence divergence: EMA(12) − EMA(26), with the
/// first [`MACD_SLOW`] entries marked warm-up.
pub fn macd(close: &[f64]) -> Result<Vec<f64>> {
    if close.len() < MACD_SLOW {
        return Err(Error::Length {
            what: "macd input".into(),
            required: MACD_SLOW,
            available: close.len(),
        });
    }
    let fast = ema(close, MACD_FAST)?;
    let slow = ema(close, MACD_SLOW)?;
    let mut out = vec![f64::NAN; close.len()];
    for t in MACD_SLOW..close.len() {
        out[t] = fast[t] - slow[t];
    }
    Ok(out)
}

/// Average true range with Wilder smoothing: the first defined value is
/// the mean of the first `period` true ranges, then
/// `ATR(t) = (ATR(t−1)·(period−1) + TR(t)) / period`.
pub fn atr(high: &[f64], low: &[f64], close: &[f64], period: usize) -> Result<Vec<f64>> {
    if high.len() != low.len() || high.len() != close.len() {
        return Err(Error::Shape(format!(
            "atr inputs must have equal lengths, got {}/{}/{}",
            high.len(),
            low.len(),
            close.len()
        )));
    }
    if period == 0 {
        return Err(Error::Config("atr period must be >= 1".into()));
    }
    if high.len() < period + 1 {
        return Err(Error::Length {
            what: "atr input".into(),
            required: period + 1,
            available: high.len(),
        });
    }
    let n = high.len();
    let mut tr = vec![f64::NAN; n];
    for t in 1..n {
        tr[t] = (high[t] - low[t])
            .max((high[t] - close[t - 1]).abs())
            .max((low[t] - close[t - 1]).abs());
    }
    let mut out = vec![f64::NAN; n];
    out[period] = tr[1..=period].iter().sum::<f64>() / period as f64;
    for t in period + 1..n {
        out[t] = (out[t - 1] * (period as f64 - 1.0) + tr[t]) / period as f64;
    }
    Ok(out)
}

/// Relative strength index with Wilder-smoothed average gain/loss.
/// Conventions: zero average loss with positive gain → 100; both zero → 50.
pub fn rsi(close: &[f64], period: usize) -> Result<Vec<f64>> {
    if period == 0 {
        return Err(Error::Config("rsi period must be >= 1".into()));
    }
    if close.len() < period + 1 {
        return Err(Error::Length {
            what: "rsi input".into(),
            required: period + 1,
            available: close.len(),
        });
    }
    let n = close.len();
    let mut gains = vec![0.0; n];
    let mut losses = vec![0.0; n];
    for t in 1..n {
        let d = close[t] - close[t - 1];
        gains[t] = d.max(0.0);
        losses[t] = (-d).max(0.0);
    }
    let mut out = vec![f64::NAN; n];
    let mut avg_gain = gains[1..=period].iter().sum::<f64>() / period as f64;
    let mut avg_loss = losses[1..=period].iter().sum::<f64>() / period as f64;
    out[period] = rsi_value(avg_gain, avg_loss);
    for t in period + 1..n {
        avg_gain = (avg_gain * (period as f64 - 1.0) + gains[t]) / period as f64;
        avg_loss = (avg_loss * (period as f64 - 1.0) + losses[t]) / period as f64;
        out[t] = rsi_value(avg_gain, avg_loss);
    }
    Ok(out)
}

fn rsi_value(avg_gain: f64, avg_loss: f64) -> f64 {
    if avg_loss > 0.0 {
        100.0 - 100.0 / (1.0 + avg_gain / avg_loss)
    } else if avg_gain > 0.0 {
        100.0
    } else {
        50.0
    }
}

/// Computes the default MACD/ATR/RSI columns for a series, aligned to its
/// bars, warm-up entries `NaN`.
pub fn indicator_columns(ohlc: &OhlcSeries) -> Result<IndicatorColumns> {
    let closes = ohlc.closes();
    Ok(IndicatorColumns {
        macd: macd(&closes)?,
        atr: atr(&ohlc.highs(), &ohlc.lows(), &closes, ATR_PERIOD)?,
        rsi: rsi(&closes, RSI_PERIOD)?,
    })
}

/// Population Pearson correlation coefficient, clamped into [−1, 1].
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "pearson inputs must have equal lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::Length {
            what: "pearson input".into(),
            required: 2,
            available: a.len(),
        });
    }
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let dx = x - mean_a;
        let dy = y - mean_b;
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "constant input series".into(),
        ));
    }
    Ok((cov / (var_a.sqrt() * var_b.sqrt())).clamp(-1.0, 1.0))
}

fn column_name(idx: usize) -> &'static str {
    if idx < N_INPUTS {
        INPUT_COLUMNS[idx]
    } else {
        "Close"
    }
}

/// Full 9×9 correlation matrix over the eight input columns plus the
/// target close (last row/column). Symmetric with unit diagonal.
pub fn correlation_matrix(frame: &FeatureFrame) -> Result<Array2<f64>> {
    let t = frame.len();
    if t < 2 {
        return Err(Error::Length {
            what: "frame rows for correlation".into(),
            required: 2,
            available: t,
        });
    }
    let n_cols = N_INPUTS + 1;
    let column = |idx: usize| -> Vec<f64> {
        if idx < N_INPUTS {
            frame.inputs.column(idx).to_vec()
        } else {
            frame.target.to_vec()
        }
    };
    let cols: Vec<Vec<f64>> = (0..n_cols).map(column).collect();

    let mut m = Array2::zeros((n_cols, n_cols));
    for i in 0..n_cols {
        m[[i, i]] = 1.0;
        for j in i + 1..n_cols {
            let r = pearson(&cols[i], &cols[j]).map_err(|e| match e {
                Error::UndefinedCorrelation(_) => Error::UndefinedCorrelation(format!(
                    "constant column {}",
                    if is_constant(&cols[i]) {
                        column_name(i)
                    } else {
                        column_name(j)
                    }
                )),
                other => other,
            })?;
            m[[i, j]] = r;
            m[[j, i]] = r;
        }
    }
    Ok(m)
}

fn is_constant(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] == w[1])
}

/// Per-input-column correlation weight vector: the feature-vs-close row of
/// the correlation matrix, taken from the training slice only.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationWeights {
    values: Vec<f64>,
}

impl CorrelationWeights {
    /// Wraps explicit weights; entries must be finite and within [−1, 1].
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Shape("correlation weights must be non-empty".into()));
        }
        for &v in &values {
            if !v.is_finite() || !(-1.0..=1.0).contains(&v) {
                return Err(Error::Numeric(format!(
                    "correlation weight {v} outside [-1, 1]"
                )));
            }
        }
        Ok(Self { values })
    }

    /// All-ones weights: the unweighted reservoir mode.
    pub fn ones(n: usize) -> Self {
        Self {
            values: vec![1.0; n],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Absolute-value correlation weights |corr(input_j, close)| on the
/// training slice; entries in [0, 1].
pub fn correlation_weights(train: &FeatureFrame) -> Result<CorrelationWeights> {
    let signed = correlation_weights_signed(train)?;
    CorrelationWeights::from_values(signed.values.iter().map(|v| v.abs()).collect())
}

/// Signed variant of [`correlation_weights`]; entries in [−1, 1]. Enabled
/// through the experiment configuration, not the default path.
pub fn correlation_weights_signed(train: &FeatureFrame) -> Result<CorrelationWeights> {
    let target: Vec<f64> = train.target.to_vec();
    let mut values = Vec::with_capacity(N_INPUTS);
    for j in 0..N_INPUTS {
        let col = train.inputs.column(j).to_vec();
        let r = pearson(&col, &target).map_err(|e| match e {
            Error::UndefinedCorrelation(_) => Error::UndefinedCorrelation(format!(
                "constant column {}",
                if is_constant(&col) {
                    column_name(j)
                } else {
                    "Close"
                }
            )),
            other => other,
        })?;
        values.push(r);
    }
    CorrelationWeights::from_values(values)
}
