use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("noise integrator variant {variant} expects {expected} auxiliary points, got {got}")]
    AuxArity {
        variant: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("unknown {what} `{value}`")]
    UnknownName { what: &'static str, value: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
