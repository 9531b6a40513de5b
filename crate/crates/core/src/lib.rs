//! Simulation core for a free-space optical reservoir computer applied to
//! multivariate, multi-step market-index forecasting.
//!
//! The crate is organized along the experiment pipeline:
//!
//! - [`ingest`] — CSV loading, calendar alignment, train/test splitting,
//!   min-max normalization.
//! - [`features`] — technical indicators (MACD, ATR, RSI) and the
//!   correlation-weight vector derived from the training slice.
//! - [`optics`] — the numerical SLM → lens → camera chain: block tiling,
//!   phase composition, centered unitary 2-D DFT, saturating quantized
//!   intensity readout.
//! - [`reservoir`] — the recurrent state update driven through the optics,
//!   with washout and state collection.
//! - [`readout`] — ridge-regression output layer plus NRMSE and
//!   error-reduction metrics.
//! - [`baselines`] — classical regression models (OLS, ridge, lasso,
//!   elastic net, kNN, CART, random forest) and chronological
//!   cross-validated model selection.

pub mod baselines;
pub mod error;
pub mod features;
pub mod ingest;
pub mod optics;
pub mod readout;
pub mod reservoir;

pub use error::{Error, Result};
