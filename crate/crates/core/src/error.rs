use thiserror::Error;

/// Errors produced by the gradient-surgery library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("cannot normalize a vector with norm {norm:e}")]
    ZeroVector { norm: f64 },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("embedding dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),

    #[error("similarity {0} is outside [-1, 1]")]
    OutOfRange(f64),

    #[error("projection undefined for coincident pair (s = {0})")]
    Degenerate(f64),

    #[error("degenerate triplet: {0}")]
    DegenerateTriplet(&'static str),

    #[error("pair weight {kind} requires {expected} relative statistics")]
    MismatchedStats { kind: &'static str, expected: &'static str },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate batch: {0}")]
    DegenerateBatch(String),

    #[error("k = {k} must be smaller than the sample count {samples}")]
    KTooLarge { k: usize, samples: usize },

    #[error("non-finite gradient for triplet {triplet} (anchor {anchor})")]
    NonFiniteGradient { triplet: usize, anchor: usize },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("epoch {epoch}, step {step}: {source}")]
    Step {
        epoch: usize,
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
