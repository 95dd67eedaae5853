use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("text is empty after normalization")]
    EmptyText,

    #[error("corpus contains no usable tokens")]
    EmptyCorpus,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("incompatible artifacts: {0}")]
    IncompatibleArtifacts(String),

    #[error("non-finite value in `{0}`")]
    Numerical(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("attention bucket is empty")]
    EmptyBucket,

    #[error("k must be at least 1, got {0}")]
    InvalidK(usize),

    #[error("space must be positive, got {0}")]
    InvalidSpace(f64),

    #[error("run contains no judged queries")]
    EmptyRun,

    #[error("training diverged in epoch {epoch}; last good checkpoint is from epoch {}", last_good.epoch)]
    Diverged {
        epoch: usize,
        last_good: Box<crate::trainer::Checkpoint>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Validation problems are the caller's fault; everything else is a runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Config(_) | Error::InvalidK(_) | Error::InvalidSpace(_))
    }
}
