use alloc::string::String;

/// Errors raised by the transducer core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in input")]
    NonFinite,

    #[error("class label {label} out of range for {n_classes} classes")]
    ClassOutOfRange { label: usize, n_classes: usize },

    #[error("calibration data is empty")]
    EmptyData,

    #[error("conditional probability is undefined: {0}")]
    UndefinedConditional(&'static str),

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid probability vector: {0}")]
    InvalidProbability(&'static str),

    #[error("utility matrix is constant and has no scale")]
    NoScale,

    #[error("achievable bounds are degenerate (min {min}, max {max})")]
    DegenerateBounds { min: f64, max: f64 },

    #[error("confusion matrix is empty")]
    EmptyConfusion,

    #[error("grid covers only {attained:.6} of the output mass (need {required})")]
    InsufficientCoverage { attained: f64, required: f64 },

    #[error("diagnostics unavailable: {0}")]
    DiagnosticUnavailable(&'static str),

    #[error("tie across {0} decisions cannot be split into half points")]
    UnsplittableTie(usize),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
