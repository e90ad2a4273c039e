use std::path::PathBuf;

use thiserror::Error;

use crate::characteristics::CharState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("value {value} outside range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("operation requires a {expected} path, got {found}")]
    UnsupportedKind { expected: &'static str, found: &'static str },

    #[error("flux validation failed: {0}")]
    Validation(String),

    #[error("characteristic integration failed at s = {s}: {reason}")]
    Integration {
        s: f64,
        reason: String,
        last: Box<CharState>,
    },

    #[error("kernel support escapes the grid: {0}")]
    Coverage(String),

    #[error("numerical failure at t = {t} (step {step}): {reason}")]
    Numerical { t: f64, step: usize, reason: String },

    #[error("window condition violated: min d(rho)/d(xi) = {min_slope} < 1/2; shrink the window")]
    ShrinkWindow { min_slope: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
