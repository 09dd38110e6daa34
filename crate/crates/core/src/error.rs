use thiserror::Error;

/// Every fallible operation in the crate reports one of these.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}: must be at least 1")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("inadmissible weight law: {0}")]
    InadmissibleLaw(String),

    #[error("moment of order {order} is infinite for {law}")]
    InfiniteMoment { order: u32, law: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("rejection sampler gave up after {0} consecutive rejections")]
    RejectionFailsafe(u64),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("not enough samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
