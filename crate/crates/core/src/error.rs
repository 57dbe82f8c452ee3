use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: at least one point is required")]
    EmptyInput,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("duplicate point: rows {first} and {second} are identical")]
    DuplicatePoint { first: usize, second: usize },

    #[error("epsilon must lie strictly between 0 and 1, got {0}")]
    InvalidEpsilon(f64),

    #[error("dimension constant must be positive, got {0}")]
    InvalidConstant(f64),

    #[error("grid certification supports at most {max} directions, got {found}")]
    TooManyDirections { found: usize, max: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{source_name}: {detail}")]
    Format { source_name: String, detail: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn format(source_name: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Format { source_name: source_name.into(), detail: detail.into() }
    }

    pub(crate) fn dim(expected: usize, found: usize) -> Self {
        Error::DimensionMismatch { expected, found }
    }

    /// Whether the error stems from the caller's input (bad file, wrong shape)
    /// rather than the environment.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
