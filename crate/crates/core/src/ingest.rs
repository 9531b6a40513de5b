//! Market and macroeconomic data ingestion.
//!
//! Loads OHLCV and macro series from local CSV exports, joins them with
//! technical-indicator columns onto the trading calendar, splits
//! chronologically, and min-max normalizes on the training slice.
//!
//! CSV contracts: OHLC files carry the header
//! `date,open,high,low,close,volume`; macro files carry `date,value`.
//! Both are UTF-8, comma-separated, `.` decimal, ISO-8601 dates.

use std::path::Path;

use chrono::NaiveDate;
use ndarray::{s, Array1, Array2};

use crate::error::{Error, Result};

/// Fixed input-column order of a [`FeatureFrame`].
pub const INPUT_COLUMNS: [&str; 8] = [
    "Close(t-1)",
    "VIX",
    "EFFR",
    "UMCSENT",
    "DXYNYB",
    "MACD",
    "ATR",
    "RSI",
];

/// Macro series names required by [`align_and_join`], in column order.
pub const MACRO_NAMES: [&str; 4] = ["VIX", "EFFR", "UMCSENT", "DXYNYB"];

/// Number of input columns per day.
pub const N_INPUTS: usize = INPUT_COLUMNS.len();

/// One daily OHLCV bar.
#[derive(Debug, Clone, PartialEq)]
pub struct OhlcBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: u64,
}

/// Dated OHLCV bars for one index, strictly increasing in date.
#[derive(Debug, Clone)]
pub struct OhlcSeries {
    pub ticker: String,
    pub bars: Vec<OhlcBar>,
}

impl OhlcSeries {
    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn closes(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.close).collect()
    }

    pub fn highs(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.high).collect()
    }

    pub fn lows(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.low).collect()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.bars.iter().map(|b| b.date).collect()
    }
}

/// A dated macroeconomic series (possibly sparse, e.g. monthly releases).
#[derive(Debug, Clone)]
pub struct MacroSeries {
    pub name: String,
    pub points: Vec<(NaiveDate, f64)>,
}

/// Per-day technical-indicator columns aligned to an [`OhlcSeries`].
/// Warm-up entries are `NaN` and are dropped by [`align_and_join`].
#[derive(Debug, Clone)]
pub struct IndicatorColumns {
    pub macd: Vec<f64>,
    pub atr: Vec<f64>,
    pub rsi: Vec<f64>,
}

/// Aligned per-day feature matrix plus the target close column.
///
/// `inputs` is T×8 in the fixed [`INPUT_COLUMNS`] order; `target[t]` is the
/// close on day `dates[t]`. Row `t` uses only information dated `<= t-1`
/// for the lagged close and `<= t` for same-day features.
#[derive(Debug, Clone)]
pub struct FeatureFrame {
    pub dates: Vec<NaiveDate>,
    pub inputs: Array2<f64>,
    pub target: Array1<f64>,
}

impl FeatureFrame {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Copy of rows `lo..hi`.
    pub fn slice_rows(&self, lo: usize, hi: usize) -> FeatureFrame {
        FeatureFrame {
            dates: self.dates[lo..hi].to_vec(),
            inputs: self.inputs.slice(s![lo..hi, ..]).to_owned(),
            target: self.target.slice(s![lo..hi]).to_owned(),
        }
    }
}

fn parse_field_f64(raw: &str, path: &str, line: u64, field: &str) -> Result<f64> {
    let v: f64 = raw.trim().parse().map_err(|_| Error::Parse {
        path: path.to_string(),
        line,
        msg: format!("invalid {field} value {raw:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            path: path.to_string(),
            line,
            msg: format!("non-finite {field} value {raw:?}"),
        });
    }
    Ok(v)
}

fn parse_field_date(raw: &str, path: &str, line: u64) -> Result<NaiveDate> {
    raw.trim().parse().map_err(|_| Error::Parse {
        path: path.to_string(),
        line,
        msg: format!("invalid ISO-8601 date {raw:?}"),
    })
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

/// Loads an OHLCV export. Rejects malformed rows (with line numbers),
/// duplicate dates, unordered dates, and bars violating
/// `high >= max(open, close)`, `low <= min(open, close)`, prices > 0.
pub fn load_ohlc_csv<P: AsRef<Path>>(path: P) -> Result<OhlcSeries> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let ticker = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();

    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;

    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            path: path_str.clone(),
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    let expected = ["date", "open", "high", "low", "close", "volume"];
    if headers.iter().map(str::to_ascii_lowercase).collect::<Vec<_>>() != expected {
        return Err(Error::Parse {
            path: path_str,
            line: 1,
            msg: format!("expected header `date,open,high,low,close,volume`, got {headers:?}"),
        });
    }

    let mut bars: Vec<OhlcBar> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path_str.clone(),
            line: e
                .position()
                .map(|p| p.line())
                .unwrap_or(bars.len() as u64 + 2),
            msg: e.to_string(),
        })?;
        let line = record_line(&rec);
        if rec.len() != 6 {
            return Err(Error::Parse {
                path: path_str,
                line,
                msg: format!("expected 6 fields, got {}", rec.len()),
            });
        }
        let date = parse_field_date(&rec[0], &path_str, line)?;
        let open = parse_field_f64(&rec[1], &path_str, line, "open")?;
        let high = parse_field_f64(&rec[2], &path_str, line, "high")?;
        let low = parse_field_f64(&rec[3], &path_str, line, "low")?;
        let close = parse_field_f64(&rec[4], &path_str, line, "close")?;
        let volume: u64 = rec[5].trim().parse().map_err(|_| Error::Parse {
            path: path_str.clone(),
            line,
            msg: format!("invalid volume value {:?}", &rec[5]),
        })?;

        if let Some(prev) = bars.last() {
            if date == prev.date {
                return Err(Error::Integrity(format!(
                    "duplicate date {date} in {path_str}"
                )));
            }
            if date < prev.date {
                return Err(Error::Integrity(format!(
                    "dates not strictly increasing at {date} in {path_str}"
                )));
            }
        }
        if open <= 0.0 || high <= 0.0 || low <= 0.0 || close <= 0.0 {
            return Err(Error::Integrity(format!(
                "non-positive price on {date} in {path_str}"
            )));
        }
        if high < open.max(close) || low > open.min(close) {
            return Err(Error::Integrity(format!(
                "inconsistent OHLC bar on {date} in {path_str}"
            )));
        }
        bars.push(OhlcBar {
            date,
            open,
            high,
            low,
            close,
            volume,
        });
    }

    Ok(OhlcSeries { ticker, bars })
}

/// Loads a `date,value` macro series. Gaps (weekends, monthly cadence) are
/// retained; forward-fill happens at join time.
pub fn load_macro_csv<P: AsRef<Path>>(path: P, name: &str) -> Result<MacroSeries> {
    let path = path.as_ref();
    let path_str = path.display().to_string();

    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;

    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            path: path_str.clone(),
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    if headers.iter().map(str::to_ascii_lowercase).collect::<Vec<_>>() != ["date", "value"] {
        return Err(Error::Parse {
            path: path_str,
            line: 1,
            msg: format!("expected header `date,value`, got {headers:?}"),
        });
    }

    let mut points: Vec<(NaiveDate, f64)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path_str.clone(),
            line: e.position().map(|p| p.line()).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = record_line(&rec);
        if rec.len() != 2 {
            return Err(Error::Parse {
                path: path_str,
                line,
                msg: format!("expected 2 fields, got {}", rec.len()),
            });
        }
        let date = parse_field_date(&rec[0], &path_str, line)?;
        let value = parse_field_f64(&rec[1], &path_str, line, "value")?;
        if let Some(&(prev, _)) = points.last() {
            if date <= prev {
                return Err(Error::Integrity(format!(
                    "dates not strictly increasing at {date} in {path_str}"
                )));
            }
        }
        points.push((date, value));
    }

    if points.is_empty() {
        return Err(Error::Length {
            what: format!("macro series {name} ({path_str})"),
            required: 1,
            available: 0,
        });
    }

    Ok(MacroSeries {
        name: name.to_string(),
        points,
    })
}

/// Forward-fills a macro series onto the given trading days.
fn forward_fill(series: &MacroSeries, days: &[NaiveDate]) -> Result<Vec<f64>> {
    let first_day = match days.first() {
        Some(d) => *d,
        None => return Ok(Vec::new()),
    };
    if series.points[0].0 > first_day {
        return Err(Error::Coverage(format!(
            "macro series {} starts {} but trading days begin {}",
            series.name, series.points[0].0, first_day
        )));
    }
    let mut out = Vec::with_capacity(days.len());
    let mut idx = 0usize;
    for &day in days {
        while idx + 1 < series.points.len() && series.points[idx + 1].0 <= day {
            idx += 1;
        }
        out.push(series.points[idx].1);
    }
    Ok(out)
}

/// Joins OHLC bars, forward-filled macro series, and indicator columns into
/// an aligned [`FeatureFrame`], dropping the indicator warm-up rows and the
/// first row (which lacks a lagged close).
///
/// `macros` must contain the four series of [`MACRO_NAMES`]; order in the
/// slice does not matter.
pub fn align_and_join(
    ohlc: &OhlcSeries,
    macros: &[MacroSeries],
    indicators: &IndicatorColumns,
) -> Result<FeatureFrame> {
    let t = ohlc.len();
    for (name, col) in [
        ("macd", &indicators.macd),
        ("atr", &indicators.atr),
        ("rsi", &indicators.rsi),
    ] {
        if col.len() != t {
            return Err(Error::Shape(format!(
                "indicator column {name} has length {}, expected {t}",
                col.len()
            )));
        }
    }

    let days = ohlc.dates();
    let mut macro_cols: Vec<Vec<f64>> = Vec::with_capacity(MACRO_NAMES.len());
    for name in MACRO_NAMES {
        let series = macros
            .iter()
            .find(|m| m.name == name)
            .ok_or_else(|| Error::Config(format!("missing macro series {name}")))?;
        macro_cols.push(forward_fill(series, &days)?);
    }

    let mut inputs = Array2::from_elem((t, N_INPUTS), f64::NAN);
    for row in 0..t {
        if row > 0 {
            inputs[[row, 0]] = ohlc.bars[row - 1].close;
        }
        for (k, col) in macro_cols.iter().enumerate() {
            inputs[[row, 1 + k]] = col[row];
        }
        inputs[[row, 5]] = indicators.macd[row];
        inputs[[row, 6]] = indicators.atr[row];
        inputs[[row, 7]] = indicators.rsi[row];
    }

    // Leading warm-up rows contain at least one NaN; everything after the
    // first complete row must be complete.
    let first_valid = (0..t)
        .find(|&row| inputs.row(row).iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Length {
            what: "rows surviving indicator warm-up".into(),
            required: 1,
            available: 0,
        })?;
    for (row, day) in days.iter().enumerate().skip(first_valid) {
        if inputs.row(row).iter().any(|v| !v.is_finite()) {
            return Err(Error::Integrity(format!(
                "NaN feature after warm-up on {day}"
            )));
        }
    }

    let kept = t - first_valid;
    let mut frame_inputs = Array2::zeros((kept, N_INPUTS));
    frame_inputs.assign(&inputs.slice(s![first_valid.., ..]));
    let target = Array1::from_iter(ohlc.bars[first_valid..].iter().map(|b| b.close));

    Ok(FeatureFrame {
        dates: days[first_valid..].to_vec(),
        inputs: frame_inputs,
        target,
    })
}

/// Splits a frame into contiguous chronological train/test slices taken
/// from the start, train first.
pub fn split(
    frame: &FeatureFrame,
    train_len: usize,
    test_len: usize,
) -> Result<(FeatureFrame, FeatureFrame)> {
    let needed = train_len + test_len;
    if frame.len() < needed {
        return Err(Error::Length {
            what: "frame rows for train/test split".into(),
            required: needed,
            available: frame.len(),
        });
    }
    Ok((
        frame.slice_rows(0, train_len),
        frame.slice_rows(train_len, needed),
    ))
}

/// Per-column min-max scaler fitted on the training slice. Column index
/// [`N_INPUTS`] is the target close.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    mins: Vec<f64>,
    maxs: Vec<f64>,
}

impl Normalizer {
    /// Fits per-column (min, max) on the training frame (inputs and target).
    /// Errors on any constant column.
    pub fn fit(train: &FeatureFrame) -> Result<Self> {
        let mut mins = Vec::with_capacity(N_INPUTS + 1);
        let mut maxs = Vec::with_capacity(N_INPUTS + 1);
        for (col, name) in INPUT_COLUMNS.iter().enumerate() {
            let view = train.inputs.column(col);
            let (lo, hi) = min_max(view.iter().copied());
            if hi <= lo {
                return Err(Error::DegenerateScale(name.to_string()));
            }
            mins.push(lo);
            maxs.push(hi);
        }
        let (lo, hi) = min_max(train.target.iter().copied());
        if hi <= lo {
            return Err(Error::DegenerateScale("Close".to_string()));
        }
        mins.push(lo);
        maxs.push(hi);
        Ok(Normalizer { mins, maxs })
    }

    /// Maps one value of column `col` into the fitted [0,1] train range.
    /// Out-of-range values are NOT clipped here; clipping happens only at
    /// phase composition.
    pub fn transform_value(&self, col: usize, x: f64) -> f64 {
        (x - self.mins[col]) / (self.maxs[col] - self.mins[col])
    }

    /// Inverse of [`Normalizer::transform_value`].
    pub fn invert_value(&self, col: usize, x: f64) -> f64 {
        x * (self.maxs[col] - self.mins[col]) + self.mins[col]
    }

    /// Normalizes every input column and the target of a frame.
    pub fn transform(&self, frame: &FeatureFrame) -> FeatureFrame {
        let mut inputs = frame.inputs.clone();
        for (col, mut column) in inputs.columns_mut().into_iter().enumerate() {
            column.mapv_inplace(|x| self.transform_value(col, x));
        }
        let target = frame.target.mapv(|x| self.transform_value(N_INPUTS, x));
        FeatureFrame {
            dates: frame.dates.clone(),
            inputs,
            target,
        }
    }

    /// Maps normalized target values back to price units (any shape).
    pub fn invert_target(&self, values: &Array2<f64>) -> Array2<f64> {
        values.mapv(|x| self.invert_value(N_INPUTS, x))
    }
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// Downloads a CSV from a configured URL to a local path. Plumbing for
/// refreshing the data directory; compiled in only with the `fetch`
/// feature and never called implicitly.
#[cfg(feature = "fetch")]
pub fn fetch_csv(url: &str, dest: &Path) -> Result<()> {
    let body = reqwest::blocking::get(url)
        .and_then(|r| r.error_for_status())
        .and_then(|r| r.text())
        .map_err(|e| Error::Config(format!("fetch {url}: {e}")))?;
    std::fs::write(dest, body)?;
    Ok(())
}
