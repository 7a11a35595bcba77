use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or input violated a documented precondition.
    #[error("invalid input: {0}")]
    Validation(String),

    /// Dataset text could not be parsed. Rows and columns are 1-based.
    #[error("malformed input at row {row}, column {col}: {message}")]
    Malformed {
        row: usize,
        col: usize,
        message: String,
    },

    /// A subset enumeration would exceed the configured cap.
    #[error("enumeration of C({n}, {k}) = {count} subsets exceeds the cap of {cap}")]
    Capacity {
        n: usize,
        k: usize,
        count: u128,
        cap: u64,
    },

    /// Every candidate training set assigns zero density to the observed output.
    #[error("posterior undefined: observed output has zero density under every training set")]
    UndefinedPosterior,

    /// Parameters became non-finite or left the divergence guard.
    #[error("training diverged at step {step}")]
    Divergence { step: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
