//! Error type shared by every module in the crate.

use std::fmt;
use std::io;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors emitted by the numeric layers, the data pipeline and the
/// experiment driver.
#[derive(Debug)]
pub enum Error {
    /// Two shapes that must agree do not.
    ShapeMismatch {
        context: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },
    /// A configuration value is outside its legal range.
    InvalidConfig(String),
    /// A gradient or activation became non-finite.
    NonFinite { context: String },
    /// A metric is undefined for the given input (e.g. single-class AUROC).
    UndefinedMetric(String),
    /// Dataset-construction preconditions were violated.
    Domain(String),
    /// A checkpoint or embedding file is malformed.
    Format(String),
    /// Wrapper around I/O failures.
    Io(io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch {
                context,
                expected,
                got,
            } => write!(
                f,
                "shape mismatch in {context}: expected {}x{}, got {}x{}",
                expected.0, expected.1, got.0, got.1
            ),
            Error::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            Error::NonFinite { context } => write!(f, "non-finite value in {context}"),
            Error::UndefinedMetric(msg) => write!(f, "undefined metric: {msg}"),
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Format(msg) => write!(f, "format error: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}
