use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("decay rate must be positive and finite, got {0}")]
    InvalidDecayRate(f64),

    #[error("duration must be non-negative and finite, got {0}")]
    InvalidDuration(f64),

    #[error("flip probability {0} is outside [0, 0.5)")]
    ProbabilityOutOfRange(f64),

    #[error("EC period {tau} s gives per-round flip probability {p}, outside (0, 0.5)")]
    DegenerateNoise { tau: f64, p: f64 },

    #[error("buffer is empty")]
    EmptyBuffer,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("assignment is not a permutation of 0..{0}")]
    NotAPermutation(usize),

    #[error("invalid batch instance: {0}")]
    InvalidInstance(String),

    #[error("interchange precondition violated: {0}")]
    InterchangePrecondition(String),

    #[error("unknown policy {0:?}; expected one of oqf, yqf, fqf")]
    UnknownPolicy(String),
}
