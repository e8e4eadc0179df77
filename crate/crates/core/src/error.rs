use thiserror::Error;

/// Errors raised by grid construction, persistence, losses and file IO.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid must be at least 1x1, got {width}x{height}")]
    EmptyGrid { width: usize, height: usize },

    #[error("expected {expected} values for the given shape, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("value {value} at index {index} is not a finite number in [0, 1]")]
    ValueOutOfRange { index: usize, value: f64 },

    #[error("pixel ({x}, {y}) has channel sum {sum}, outside 1 +/- 1e-4")]
    SimplexViolation { x: usize, y: usize, sum: f64 },

    #[error("class id {class} out of range for {num_classes} classes")]
    ClassOutOfRange { class: usize, num_classes: usize },

    #[error("at least two classes are required, got {0}")]
    TooFewClasses(usize),

    #[error("shape mismatch: {left} vs {right}")]
    ShapeMismatch { left: String, right: String },

    #[error("mask value {value} at index {index} is not binary")]
    NonBinaryMask { index: usize, value: f64 },

    #[error("comparison value {comparison} is below target value {target} at pixel {index}")]
    NotDominating {
        index: usize,
        comparison: f64,
        target: f64,
    },

    #[error("grid {width}x{height} exceeds the oracle size cap of {cap}x{cap}")]
    TooLargeForOracle {
        width: usize,
        height: usize,
        cap: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("tensor file: {0}")]
    Format(String),

    #[error("truncated tensor payload: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    /// Whether the error stems from a broken internal invariant rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Internal(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
