use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum IcpError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite coordinate at index {0}")]
    NonFinite(usize),

    #[error("probability {value} out of range for {context}")]
    ProbabilityOutOfRange { value: f64, context: String },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid state for theory `{theory}`: {reason}")]
    InvalidState { theory: String, reason: String },

    #[error("invalid measurement `{label}`: {reason}")]
    InvalidMeasurement { label: String, reason: String },

    #[error("invalid density operator: {0}")]
    InvalidDensityOperator(String),

    #[error("invalid theory: {0}")]
    InvalidTheory(String),

    #[error("unknown theory `{0}`")]
    UnknownTheory(String),

    #[error("unknown measurement `{name}` in theory `{theory}`")]
    UnknownMeasurement { theory: String, name: String },

    #[error("unknown register `{0}`")]
    UnknownRegister(String),

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("search budget exceeded after {evaluations} evaluations")]
    BudgetExceeded { evaluations: usize },
}

pub type Result<T> = std::result::Result<T, IcpError>;
