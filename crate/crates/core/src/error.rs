use alloc::string::String;
use core::fmt;

/// Errors produced by the algorithmic core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Block index out of range or inconsistent layout definition.
    Layout(String),
    /// Matrix dimensions do not agree.
    Shape(String),
    /// Input fails a precondition (non-finite values, empty sets, bad ranges).
    Validation(String),
    /// Dataset content is incomplete or inconsistent (unpaired frames,
    /// missing external feature rows).
    Ingestion(String),
    /// The unregularized normal equations are rank-deficient.
    Singular(String),
    /// Learned weights are degenerate (all-zero model).
    DegenerateModel(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Layout(msg) => write!(f, "layout error: {msg}"),
            Error::Shape(msg) => write!(f, "shape error: {msg}"),
            Error::Validation(msg) => write!(f, "validation error: {msg}"),
            Error::Ingestion(msg) => write!(f, "ingestion error: {msg}"),
            Error::Singular(msg) => write!(f, "singular system: {msg}"),
            Error::DegenerateModel(msg) => write!(f, "degenerate model: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
