//! Error types shared across the simulator.

use std::path::PathBuf;

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A scalar or vector argument violated a precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Configuration validation failure, naming the offending field.
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    /// Matrix shapes do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The effective channel is rank deficient; carries the Gram condition
    /// number that tripped the check.
    #[error("singular effective channel: Gram condition number {cond:.3e} exceeds 1e12")]
    SingularChannel { cond: f64 },

    /// A frequency fell outside the absorption table coverage.
    #[error("frequency {freq_hz:.3e} Hz outside absorption table coverage [{lo_hz:.3e}, {hi_hz:.3e}]")]
    OutOfCoverage { freq_hz: f64, lo_hz: f64, hi_hz: f64 },

    /// An absorption table failed structural validation.
    #[error("malformed absorption table: {0}")]
    MalformedTable(String),

    /// Unknown precoding scheme label.
    #[error("unknown scheme `{0}` (expected one of digital, analog, hybrid-full-ps, hybrid-sub-ps, hybrid-full-td, hybrid-sub-td, delay-phase)")]
    UnknownScheme(String),

    /// Too many singular channel draws had to be re-sampled.
    #[error("resample budget exceeded: {resamples} resamples over {trials} trials (limit 10%); channel draws are too often singular")]
    ResampleBudget { resamples: u64, trials: u64 },

    /// JSON parse failure, with file path and line/column context.
    #[error("failed to parse {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    /// I/O failure, with the path that triggered it.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid_config(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}
