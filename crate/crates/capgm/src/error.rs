use std::io;
use std::path::{Path, PathBuf};

use capgm_core::Error as ModelError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical abort in chain {chain}: {source}")]
    Numerical {
        chain: u64,
        #[source]
        source: ModelError,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical { .. } => 4,
            CliError::Io { .. } => 1,
        }
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Classify an error raised while validating or preparing a model.
    pub fn from_model(err: ModelError) -> Self {
        match err {
            ModelError::Config(m) | ModelError::Truncation(m) => CliError::Config(m),
            e if e.is_numerical() => CliError::Numerical {
                chain: 0,
                source: e,
            },
            ModelError::Aborted { source, .. } => CliError::from_model(*source),
            other => CliError::Data(other.to_string()),
        }
    }

    /// Classify an error returned by a running chain.
    pub fn from_chain(chain: u64, err: ModelError) -> Self {
        if err.is_numerical() {
            CliError::Numerical { chain, source: err }
        } else {
            CliError::from_model(err)
        }
    }
}
