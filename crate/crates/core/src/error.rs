//! Error type shared across the crate.

use alloc::string::String;
use core::fmt;

/// Everything that can go wrong in the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A tensor was requested with an empty or zero-sized dimension, or data
    /// length does not match the shape.
    InvalidShape(String),
    /// Two operands have incompatible shapes.
    ShapeMismatch(String),
    /// An operation produced (or was given) NaN or infinite values.
    NonFinite(String),
    /// A variable was used with the wrong tape, or the loss is detached.
    Tape(String),
    /// A parameter is outside its documented domain.
    InvalidParameter(String),
    /// An input value violates a precondition (missing labels, empty mask, ...).
    InvalidInput(String),
    /// A stratified split cannot be built from the given labels/ratios.
    InvalidSplit(String),
    /// A metric is undefined for this input (e.g. homophily with no edges).
    UndefinedMetric(String),
    /// Training diverged; carries the epoch at which it happened.
    TrainingFailure { epoch: usize, message: String },
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidShape(m) => write!(f, "invalid shape: {m}"),
            Error::ShapeMismatch(m) => write!(f, "shape mismatch: {m}"),
            Error::NonFinite(m) => write!(f, "non-finite value: {m}"),
            Error::Tape(m) => write!(f, "tape error: {m}"),
            Error::InvalidParameter(m) => write!(f, "invalid parameter: {m}"),
            Error::InvalidInput(m) => write!(f, "invalid input: {m}"),
            Error::InvalidSplit(m) => write!(f, "invalid split: {m}"),
            Error::UndefinedMetric(m) => write!(f, "undefined metric: {m}"),
            Error::TrainingFailure { epoch, message } => {
                write!(f, "training failed at epoch {epoch}: {message}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
