use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{context}: {source}")]
    Json { context: String, source: serde_json::Error },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] gluepour_core::Error),
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

impl HarnessError {
    /// Process exit status: 2 for bad input, 1 for solver failures.
    pub fn exit_code(&self) -> i32 {
        use gluepour_core::Error as E;
        match self {
            HarnessError::Solver(E::Validation(_) | E::ShapeMismatch { .. } | E::InvalidArgument(_)) => 2,
            HarnessError::Solver(_) => 1,
            _ => 2,
        }
    }
}
