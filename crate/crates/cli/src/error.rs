use std::path::PathBuf;
use thiserror::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CERTIFICATION: u8 = 1;
pub const EXIT_SIMULATION: u8 = 2;
pub const EXIT_INPUT: u8 = 3;

/// Input and I/O failures. All map to the input-error exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Core(#[from] formation_core::Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("unknown shape '{0}'")]
    UnknownShape(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}
