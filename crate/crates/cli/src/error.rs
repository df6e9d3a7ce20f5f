use std::io;
use std::path::PathBuf;

use thiserror::Error;
use xaikit_core::XaiError;

use crate::npy::NpyError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Npy {
        path: PathBuf,
        #[source]
        source: NpyError,
    },
    #[error("{path}: {message}")]
    Table { path: PathBuf, message: String },
    #[error("cannot start predictor {command:?}: {source}")]
    Spawn {
        command: String,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Compute(#[from] XaiError),
    #[error("{0}")]
    Check(String),
}

impl CliError {
    /// 2 for usage and file problems, 1 for everything that failed while computing.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Compute(_) | CliError::Check(_) => 1,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
