use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid decision matrix: {0}")]
    InvalidMatrix(String),
    #[error("attribute {0} has zero norm")]
    Normalization(usize),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("coefficient of variation undefined for zero mean")]
    ZeroMean,
    #[error("ranking has no spread")]
    ZeroVariance,
    #[error("unknown ranking method `{0}`")]
    UnknownMethod(String),
    #[error("invalid argument: {0}")]
    InvalidArg(String),
    #[error(transparent)]
    Model(#[from] opa_core::OpaError),
    #[error("malformed fixture: {0}")]
    Fixture(#[from] serde_json::Error),
}

impl BenchError {
    pub fn code(&self) -> &'static str {
        match self {
            BenchError::InvalidMatrix(_) => "INVALID_MATRIX",
            BenchError::Normalization(_) => "NORMALIZATION_ERROR",
            BenchError::LengthMismatch { .. } => "LENGTH_MISMATCH",
            BenchError::InsufficientSamples { .. } => "INSUFFICIENT_SAMPLES",
            BenchError::ZeroMean => "ZERO_MEAN",
            BenchError::ZeroVariance => "ZERO_VARIANCE",
            BenchError::UnknownMethod(_) => "UNKNOWN_METHOD",
            BenchError::InvalidArg(_) => "INVALID_ARG",
            BenchError::Model(e) => e.code(),
            BenchError::Fixture(_) => "INVALID_FIXTURE",
        }
    }

    /// True for errors caused by the caller's input rather than a solver.
    pub fn is_validation(&self) -> bool {
        match self {
            BenchError::Model(e) => e.is_validation(),
            _ => true,
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
