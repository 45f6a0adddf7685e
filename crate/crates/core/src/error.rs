use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the estimator, bootstrap and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    Usage(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("observation stream exhausted after {read} of {needed} observations for block pair {t}")]
    StreamExhausted { t: usize, needed: usize, read: usize },

    #[error("out-of-order update: expected iteration {expected}, got {got}")]
    Sequencing { expected: usize, got: usize },

    #[error("finite-difference check is not defined for the {0} loss")]
    UnsupportedFamily(&'static str),

    #[error("no complete block pair could be formed; nothing to report")]
    EmptyReport,

    #[error("line {line}: {message}")]
    Data { line: u64, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn usage(message: impl Into<String>) -> Self {
        Error::Usage(message.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
