use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};

use orc_harness::config::{ExperimentConfig, Overrides};
use orc_harness::experiment::{run_experiment, run_with_frames, ExperimentOutcome};
use orc_harness::synthetic::{synthetic_frame, write_sample_data};
use orc_harness::{plot, MetricsReport};

/// Optical reservoir computing market-index forecaster (simulator).
#[derive(Parser)]
#[command(name = "orc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file (or the synthetic
    /// suite with --synthetic).
    Run {
        /// TOML experiment config; paths inside are relative to its
        /// directory. Optional when --synthetic is given.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (falls back to $ORC_OUT_DIR, then the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated subset of configured tickers.
        #[arg(long, value_delimiter = ',')]
        tickers: Option<Vec<String>>,
        /// Comma-separated prediction horizons, e.g. 1,4,10.
        #[arg(long, value_delimiter = ',')]
        horizons: Option<Vec<usize>>,
        /// Run the built-in synthetic task instead of configured data.
        #[arg(long)]
        synthetic: bool,
        /// Also render SVG charts next to the CSV outputs.
        #[arg(long)]
        plots: bool,
    },
    /// Generate sample OHLC + macro CSV files in the documented formats.
    GenData {
        #[arg(long)]
        out: PathBuf,
        /// Tickers to synthesize, comma-separated.
        #[arg(long, value_delimiter = ',', default_value = "SYNA,SYNB")]
        tickers: Vec<String>,
        /// Trading days per ticker.
        #[arg(long, default_value_t = 700)]
        days: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Download a CSV to a local path (compiled in with the `fetch`
    /// feature).
    #[cfg(feature = "fetch")]
    Fetch {
        #[arg(long)]
        url: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(
    config: Option<&PathBuf>,
    synthetic: bool,
    overrides: &Overrides,
) -> Result<ExperimentConfig> {
    let mut cfg = match config {
        Some(path) => ExperimentConfig::load(path)?,
        None if synthetic => ExperimentConfig::default(),
        None => bail!("--config is required unless --synthetic is given"),
    };
    cfg.apply_overrides(overrides)?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            tickers,
            horizons,
            synthetic,
            plots,
        } => {
            let overrides = Overrides {
                seed,
                out_dir: out,
                tickers,
                horizons,
            };
            let cfg = load_config(config.as_ref(), synthetic, &overrides)?;
            let outcome = if synthetic {
                let frame = synthetic_frame(cfg.master_seed, cfg.train_len + cfg.test_len);
                run_with_frames(&cfg, &[("SYNTH".to_string(), frame)])?
            } else {
                run_experiment(&cfg)?
            };
            if plots {
                render_plots(&cfg, &outcome)?;
            }
            print_summary(&outcome.report);
            if outcome.report.failures.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!(
                    "{} cell(s) failed; see {}",
                    outcome.report.failures.len(),
                    cfg.out_dir.join("failures.csv").display()
                );
                Ok(ExitCode::FAILURE)
            }
        }
        Command::GenData {
            out,
            tickers,
            days,
            seed,
        } => {
            write_sample_data(&out, &tickers, days, seed)?;
            println!(
                "wrote {} ticker file(s) and 4 macro files to {}",
                tickers.len(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        #[cfg(feature = "fetch")]
        Command::Fetch { url, out } => {
            use anyhow::Context as _;
            orc_core::ingest::fetch_csv(&url, &out)
                .with_context(|| format!("fetching {url}"))?;
            println!("saved {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn render_plots(cfg: &ExperimentConfig, outcome: &ExperimentOutcome) -> Result<()> {
    for cell in &outcome.cells {
        plot::render_predictions(cell, &cfg.out_dir)?;
    }
    plot::render_error_reduction(&outcome.report, &cfg.horizons, &cfg.out_dir)
}

fn print_summary(report: &MetricsReport) {
    println!("ticker,horizon,model,nrmse");
    for row in &report.rows {
        println!(
            "{},{},{},{}",
            row.ticker,
            row.horizon,
            row.model,
            row.nrmse.map_or("NA".to_string(), |v| format!("{v:.4}"))
        );
    }
    for er in &report.er_rows {
        if let Some(v) = er.er {
            println!(
                "ER {} h={} vs {}: {:.1}%",
                er.ticker,
                er.horizon,
                er.best_ml,
                v * 100.0
            );
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
