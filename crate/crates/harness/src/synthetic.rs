//! Synthetic data: a desk-scale nonlinear autoregressive task for
//! end-to-end runs without market data, and a sample-CSV generator for the
//! file-based pipeline.
//!
//! The forecasting target is a second-order NARMA-style recurrence
//!
//! `y(t+1) = 0.7·y(t) + 0.2·y(t)·y(t−1) + 0.35·u(t)³ + 0.05`
//!
//! driven by `u(t) ~ U[0, 0.5]`. The trajectory is bounded for every
//! driver sequence: even the max-drive envelope map has a stable fixed
//! point near 0.44 with its escape threshold above 1. The eight input
//! columns mirror the market
//! frame layout: the lagged target, three channels carrying lagged target
//! information (the driver `u(t−1)` that produced today's value, a noisy
//! `y(t−2)`, and a noisy mix of `y(t−1)` and `u(t−1)`), and four
//! independent noise channels. Like the market features, the informative
//! channels correlate with the same-day target, which is what the
//! correlation weights reward.

use std::path::Path;

use anyhow::{Context, Result};
use chrono::{Datelike, NaiveDate};
use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use orc_core::ingest::{FeatureFrame, N_INPUTS};

/// Index of the first pure-noise channel in the synthetic frame.
pub const FIRST_NOISE_COLUMN: usize = 4;

fn weekdays_from(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut days = Vec::with_capacity(n);
    let mut day = start;
    while days.len() < n {
        if day.weekday().number_from_monday() <= 5 {
            days.push(day);
        }
        day = day.succ_opt().expect("date range");
    }
    days
}

/// Generates the synthetic task as a ready [`FeatureFrame`] of `len` rows.
pub fn synthetic_frame(seed: u64, len: usize) -> FeatureFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = len + 3; // recurrence warm-up margin

    let drivers: Vec<f64> = (0..total).map(|_| rng.random::<f64>() * 0.5).collect();
    let mut y = vec![0.1_f64; total];
    for t in 1..total - 1 {
        y[t + 1] =
            0.7 * y[t] + 0.2 * y[t] * y[t - 1] + 0.35 * drivers[t].powi(3) + 0.05;
    }

    let offset = 3; // rows before this lack the lags below
    let mut inputs = Array2::zeros((len, N_INPUTS));
    let mut target = Array1::zeros(len);
    for row in 0..len {
        let t = row + offset;
        inputs[[row, 0]] = y[t - 1];
        inputs[[row, 1]] = drivers[t - 1];
        inputs[[row, 2]] = y[t - 2] + 0.02 * rng.random::<f64>();
        inputs[[row, 3]] =
            0.5 * y[t - 1] + 0.5 * drivers[t - 1] + 0.02 * rng.random::<f64>();
        for c in FIRST_NOISE_COLUMN..N_INPUTS {
            inputs[[row, c]] = rng.random::<f64>();
        }
        target[row] = y[t];
    }

    FeatureFrame {
        dates: weekdays_from(NaiveDate::from_ymd_opt(2020, 1, 6).unwrap(), len),
        inputs,
        target,
    }
}

/// Writes sample OHLC and macro CSVs in the documented formats, one OHLC
/// file per ticker plus `vix/effr/umcsent/dxynyb` macro files. OHLC closes
/// follow a seeded random walk; EFFR is daily (including weekends),
/// UMCSENT monthly, VIX and DXYNYB per trading day.
pub fn write_sample_data(dir: &Path, tickers: &[String], days: usize, seed: u64) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating sample data dir {}", dir.display()))?;
    let start = NaiveDate::from_ymd_opt(2020, 1, 6).unwrap();
    let trading_days = weekdays_from(start, days);

    for (ti, ticker) in tickers.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(ti as u64));
        let mut close = 1000.0 + 500.0 * ti as f64;
        let mut rows = String::from("date,open,high,low,close,volume\n");
        for day in &trading_days {
            let open = close;
            let drift = 0.015 * (rng.random::<f64>() - 0.48);
            close = (close * (1.0 + drift)).max(1.0);
            let high = open.max(close) * (1.0 + 0.004 * rng.random::<f64>());
            let low = open.min(close) * (1.0 - 0.004 * rng.random::<f64>());
            let volume = 10_000 + (rng.random::<f64>() * 5_000.0) as u64;
            rows.push_str(&format!(
                "{day},{open},{high},{low},{close},{volume}\n"
            ));
        }
        let path = dir.join(format!("{}.csv", sanitize(ticker)));
        std::fs::write(&path, rows)
            .with_context(|| format!("writing {}", path.display()))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31).wrapping_add(7));

    // VIX and DXYNYB on trading days.
    let mut vix = String::from("date,value\n");
    let mut dxy = String::from("date,value\n");
    let mut vix_level = 18.0_f64;
    let mut dxy_level = 102.0_f64;
    for day in &trading_days {
        vix_level = (vix_level + 1.5 * (rng.random::<f64>() - 0.5)).clamp(9.0, 80.0);
        dxy_level += 0.3 * (rng.random::<f64>() - 0.5);
        vix.push_str(&format!("{day},{vix_level}\n"));
        dxy.push_str(&format!("{day},{dxy_level}\n"));
    }
    std::fs::write(dir.join("vix.csv"), vix)?;
    std::fs::write(dir.join("dxynyb.csv"), dxy)?;

    // EFFR daily including weekends.
    let mut effr = String::from("date,value\n");
    let mut rate = 4.33_f64;
    let last = *trading_days.last().expect("days >= 1");
    let mut day = start;
    while day <= last {
        if rng.random::<f64>() < 0.01 {
            rate += 0.25 * if rng.random::<f64>() < 0.5 { 1.0 } else { -1.0 };
            rate = rate.clamp(0.05, 9.0);
        }
        // Tiny wiggle so the column is never constant over a window.
        let printed = rate + 0.002 * rng.random::<f64>();
        effr.push_str(&format!("{day},{printed}\n"));
        day = day.succ_opt().unwrap();
    }
    std::fs::write(dir.join("effr.csv"), effr)?;

    // UMCSENT monthly on the first of the month.
    let mut umcsent = String::from("date,value\n");
    let mut sentiment = 65.0_f64;
    let mut month_day = NaiveDate::from_ymd_opt(start.year(), start.month(), 1).unwrap();
    while month_day <= last {
        sentiment = (sentiment + 4.0 * (rng.random::<f64>() - 0.5)).clamp(40.0, 110.0);
        umcsent.push_str(&format!("{month_day},{sentiment}\n"));
        month_day = next_month(month_day);
    }
    std::fs::write(dir.join("umcsent.csv"), umcsent)?;

    Ok(())
}

fn next_month(d: NaiveDate) -> NaiveDate {
    let (y, m) = if d.month() == 12 {
        (d.year() + 1, 1)
    } else {
        (d.year(), d.month() + 1)
    };
    NaiveDate::from_ymd_opt(y, m, 1).expect("valid month start")
}

/// File-name-safe ticker: non-alphanumerics become `_`, trimmed at the
/// edges (`^NYA` → `NYA`, `MME=F` → `MME_F`).
pub fn sanitize(ticker: &str) -> String {
    let mapped: String = ticker
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    let trimmed = mapped.trim_matches('_');
    if trimmed.is_empty() {
        "ticker".to_string()
    } else {
        trimmed.to_string()
    }
}
