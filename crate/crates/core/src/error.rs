use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge: {0}")]
    NonConvergent(String),

    #[error("quadrature evaluation budget exceeded ({evaluations} evaluations)")]
    QuadratureBudgetExceeded { evaluations: usize },

    #[error("circulant embedding is not positive semi-definite: min eigenvalue {min_eigenvalue:e}, max {max_eigenvalue:e}")]
    EmbeddingNotPsd {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },

    #[error("index {index} out of range 0..{len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("scheme supports dimension 1 only, got d={0}")]
    DimensionUnsupported(usize),

    #[error("noise realization does not match the grid")]
    GridMismatch,

    #[error("sigma violates condition sigma(1) != 0 (C3)")]
    TrivialSigma,

    #[error("need at least {needed} replicas, got {got}")]
    InsufficientReplicas { needed: usize, got: usize },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("ball of radius {radius} plus light cone exceeds the domain (limit {limit})")]
    BallExceedsDomain { radius: f64, limit: f64 },

    #[error("difference quotient underflowed for epsilon={0:e}")]
    DegenerateEpsilon(f64),

    #[error("closed-form covariance requires constant sigma")]
    ModeMismatch,

    #[error("variance is identically zero")]
    DegenerateVariance,

    #[error("io error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
