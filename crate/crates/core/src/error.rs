//! Error type shared across the crate.

use std::fmt;
use std::io;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// A parameter fails a precondition (zero counts, bad ranges, ...).
    InvalidParameter(String),
    /// Two inputs that must share a dimension do not.
    DimensionMismatch { expected: usize, got: usize },
    /// A vector with zero norm cannot be normalized.
    ZeroNormRow { id: u32 },
    /// An operation was asked to run on an empty collection.
    EmptyInput(String),
    /// Requested probe count is outside [1, m].
    ProbesOutOfRange { probes: usize, m: usize },
    /// Power-law fit has fewer than three usable (frequency, coherence) pairs.
    InsufficientPairs { usable: usize },
    /// A recall target lies outside the range a curve actually reaches.
    UnreachableRecall { target: f64, min: f64, max: f64 },
    /// A file does not match the expected on-disk layout.
    Format(String),
    Io(io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::ZeroNormRow { id } => write!(f, "vector {id} has zero norm"),
            Error::EmptyInput(what) => write!(f, "empty input: {what}"),
            Error::ProbesOutOfRange { probes, m } => {
                write!(f, "probe count {probes} outside valid range [1, {m}]")
            }
            Error::InsufficientPairs { usable } => {
                write!(f, "power-law fit needs at least 3 usable pairs, have {usable}")
            }
            Error::UnreachableRecall { target, min, max } => write!(
                f,
                "recall target {target} outside achieved range [{min}, {max}]"
            ),
            Error::Format(msg) => write!(f, "bad file format: {msg}"),
            Error::Io(err) => write!(f, "io error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(err: io::Error) -> Self {
        Error::Io(err)
    }
}
