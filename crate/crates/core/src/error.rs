use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure of a single adjacent-pair threshold computation.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum PairError {
    #[error("conditional variances are equal; use the AWGN threshold")]
    EqualVariances,
    #[error("negative discriminant {discriminant:e}: the MAP region of one symbol is empty")]
    NegativeDiscriminant { discriminant: f64 },
    #[error("zero symbol probability")]
    ZeroProbability,
}

/// Failure while assembling a full threshold set.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ThresholdError {
    #[error("pair ({pair}, {next}): {kind}", next = .pair + 1)]
    Pair { pair: usize, kind: PairError },
    #[error("thresholds not strictly increasing at index {index}; use argmax detection")]
    NonMonotone { index: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid constellation: {0}")]
    InvalidConstellation(String),
    #[error("extinction ratio must be positive, got {0} dB")]
    NonPositiveEr(f64),
    #[error("invalid link parameter `{field}`: {reason}")]
    InvalidLink { field: &'static str, reason: String },
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("symbol index {index} out of range for M = {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
    #[error("invalid simulation setting `{field}`: {reason}")]
    InvalidMcConfig { field: &'static str, reason: String },
    #[error("invalid optimization problem: {0}")]
    InvalidProblem(String),
    #[error("solver failure: {0}")]
    SolverFailure(String),
}
