use std::fmt;
use std::path::PathBuf;

use placerec_core::Error as CoreError;

/// Top-level error with a stable process exit code per failure class.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, bad config values, inconsistent shapes. Exit 2.
    Validation(String),
    /// Broken datasets: unreadable frames, unpaired sensors, bad GPS lines. Exit 3.
    Ingestion(String),
    /// Solver failures (singular systems, degenerate models). Exit 4.
    Solver(String),
    /// Filesystem failures, always carrying the offending path. Exit 5.
    Io(PathBuf, std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Ingestion(_) => 3,
            CliError::Solver(_) => 4,
            CliError::Io(_, _) => 5,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |e| CliError::Io(path, e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(msg) => write!(f, "validation error: {msg}"),
            CliError::Ingestion(msg) => write!(f, "ingestion error: {msg}"),
            CliError::Solver(msg) => write!(f, "solver error: {msg}"),
            CliError::Io(path, e) => write!(f, "io error at {}: {e}", path.display()),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Ingestion(msg) => CliError::Ingestion(msg),
            CoreError::Singular(msg) | CoreError::DegenerateModel(msg) => CliError::Solver(msg),
            CoreError::Layout(msg) | CoreError::Shape(msg) | CoreError::Validation(msg) => {
                CliError::Validation(msg)
            }
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
