// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

/// Failures surfaced by the command-line layer.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] irregcp::Error),
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{0}")]
    Input(String),
    #[error("grid file line {line}: {message}")]
    Grid { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("every benchmark cell failed")]
    AllCellsFailed,
}

impl CliError {
    /// Process exit code: 2 for degenerate statistical input, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_degenerate_input() => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
