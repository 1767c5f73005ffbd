use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(sensopt_core::Error),
    #[error("validation failed: {0}")]
    Validation(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 1 usage/IO, 2 infeasible scenario, 3 validation failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(sensopt_core::Error::Infeasible { .. }) => 2,
            CliError::Validation(_) => 3,
            _ => 1,
        }
    }
}

impl From<sensopt_core::Error> for CliError {
    fn from(e: sensopt_core::Error) -> Self {
        CliError::Core(e)
    }
}
