use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected length {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("retraction is degenerate: smallest singular value {min_sv:e} vs largest {max_sv:e}")]
    RankDeficient { min_sv: f64, max_sv: f64 },

    #[error("interference threshold is zero; the interference multiplier is undefined")]
    ZeroInterferenceThreshold,

    #[error("invalid experiment config: {0}")]
    Config(String),

    #[error("cannot aggregate an empty result set")]
    EmptyResults,

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
