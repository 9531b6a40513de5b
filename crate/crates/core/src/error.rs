//! Error type shared by every module in the crate.

use thiserror::Error;

/// Crate-wide error enum. Variants map to the failure classes of the
/// pipeline stages: parsing and integrity checks during ingestion,
/// shape/length preconditions of the numeric routines, and configuration
/// validation of the optics and models.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// Malformed CSV content; carries the file and 1-based line number.
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: u64,
        msg: String,
    },

    /// Data violates an integrity contract (duplicate dates, unordered
    /// dates, impossible OHLC bars).
    #[error("integrity error: {0}")]
    Integrity(String),

    /// A macro series does not cover the trading-day range it must join.
    #[error("coverage error: {0}")]
    Coverage(String),

    /// Mismatched vector/matrix dimensions.
    #[error("shape error: {0}")]
    Shape(String),

    /// Not enough rows/steps for the requested operation.
    #[error("length error: {what}: required {required}, available {available}")]
    Length {
        what: String,
        required: usize,
        available: usize,
    },

    /// A column is constant where a non-degenerate scale is required.
    #[error("degenerate scale: column {0} is constant")]
    DegenerateScale(String),

    /// Pearson correlation is undefined for a constant input.
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    /// More input values than modulation blocks.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// Invalid grid/block/node geometry.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Invalid configuration value.
    #[error("config error: {0}")]
    Config(String),

    /// Non-finite values where finite numbers are required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Rank-deficient system with no regularization.
    #[error("singular system: {0}; use lambda > 0")]
    Singular(String),

    /// Argument outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;
