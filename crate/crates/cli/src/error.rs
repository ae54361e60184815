use swl_core::Error;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] Error),

    #[error("{0}")]
    Usage(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for bad input, 3 for numerical or runtime failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Core(e) => match e {
                Error::InvalidParameter(_)
                | Error::TrivialSigma
                | Error::BallExceedsDomain { .. }
                | Error::InsufficientReplicas { .. }
                | Error::TooFewSamples { .. }
                | Error::ModeMismatch
                | Error::IndexOutOfRange { .. }
                | Error::DimensionUnsupported(_)
                | Error::Format(_) => 2,
                Error::NonConvergent(_)
                | Error::QuadratureBudgetExceeded { .. }
                | Error::EmbeddingNotPsd { .. }
                | Error::DegenerateEpsilon(_)
                | Error::DegenerateVariance
                | Error::GridMismatch
                | Error::Io(_) => 3,
            },
        }
    }
}
