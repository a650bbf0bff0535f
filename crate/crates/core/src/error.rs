use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("distance {distance_m} m is below the minimum {min_m} m")]
    DistanceTooSmall { distance_m: f64, min_m: f64 },

    #[error("no eligible users left to select")]
    NoCandidates,

    #[error("jain index undefined for an all-zero rate vector")]
    UndefinedFairness,

    #[error("config error: {0}")]
    Config(String),

    #[error("drop {drop_id}: {source}")]
    Drop {
        drop_id: u64,
        #[source]
        source: Box<Error>,
    },

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
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by reading or writing files rather than by
    /// the configuration or the inputs.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } | Error::Csv(_) => true,
            Error::Drop { source, .. } => source.is_io(),
            _ => false,
        }
    }
}
