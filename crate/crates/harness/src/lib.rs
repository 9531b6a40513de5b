//! Experiment harness around `orc-core`: configuration, orchestration,
//! synthetic tasks, artifact emission, and optional chart rendering. The
//! `orc` binary is a thin CLI over this library.

pub mod config;
pub mod emit;
pub mod experiment;
pub mod plot;
pub mod report;
pub mod synthetic;

pub use config::{derive_seed, ExperimentConfig, Overrides};
pub use experiment::{run_experiment, run_synthetic_suite, run_with_frames, ExperimentOutcome};
pub use report::MetricsReport;
