use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: malformed CSV at line {line}{}, byte {byte}: {message}", column.map(|c| format!(", column {c}")).unwrap_or_default())]
    Parse { path: PathBuf, line: u64, column: Option<usize>, byte: u64, message: String },

    #[error("{path}: line {line}, column {column} ({name}): '{value}' is not a finite number")]
    NonNumericCell { path: PathBuf, line: u64, column: usize, name: String, value: String },

    #[error("{path}: no response column named '{name}'")]
    MissingResponse { path: PathBuf, name: String },

    #[error("{path}: no data rows")]
    EmptyData { path: PathBuf },

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}: {message}")]
    BadFit { path: PathBuf, message: String },

    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Numerical(String),

    #[error(transparent)]
    Core(#[from] wsi_core::Error),
}

impl CliError {
    /// 1 for bad input or configuration, 2 when the numerics fail.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            CliError::Numerical(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
