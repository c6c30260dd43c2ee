use std::path::{Path, PathBuf};

use thiserror::Error;

use qst_classify::ClassifyError;
use qst_reconstruct::ReconstructError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// Process exit status: 2 for bad input or configuration, 3 for a
    /// numerical failure during a run, 1 for I/O problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 1,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

impl From<ReconstructError> for CliError {
    fn from(e: ReconstructError) -> Self {
        match e {
            ReconstructError::Numerical { .. } => CliError::Numerical(e.to_string()),
            ReconstructError::Nn(qst_nn::NnError::NonFinite(_)) => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<ClassifyError> for CliError {
    fn from(e: ClassifyError) -> Self {
        match e {
            ClassifyError::Diverged { .. } | ClassifyError::Nn(qst_nn::NnError::NonFinite(_)) => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<qst_core::QstError> for CliError {
    fn from(e: qst_core::QstError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<qst_nn::NnError> for CliError {
    fn from(e: qst_nn::NnError) -> Self {
        match e {
            qst_nn::NnError::NonFinite(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
