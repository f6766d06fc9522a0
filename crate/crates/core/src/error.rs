use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{0}")]
    Validation(String),

    #[error("duplicate sample id '{0}'")]
    DuplicateId(String),

    #[error("class '{class}' has {available} samples but {requested} were requested without replacement")]
    Capacity {
        class: String,
        available: usize,
        requested: u64,
    },

    #[error("scenario boosts class '{0}' which has zero samples in the base distribution")]
    DegenerateScenario(String),

    #[error("similarity undefined: {0} has zero norm")]
    ZeroNorm(&'static str),

    #[error("sample '{0}' has neither an embedding reference nor prompt keywords")]
    Unscorable(String),

    #[error("oracle found no scorable synthetic samples for class '{0}'")]
    EmptyOracle(String),

    #[error("classification report undefined for an empty confusion matrix")]
    EmptyReport,

    #[error("predictions missing for {} sample id(s): {}", .0.len(), .0.join(", "))]
    Coverage(Vec<String>),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// Process exit code for the CLI: 2 validation, 3 I/O, 4 coverage.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            Error::Coverage(_) => 4,
            _ => 2,
        }
    }
}
