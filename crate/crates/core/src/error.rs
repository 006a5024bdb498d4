use thiserror::Error;

/// Errors raised across the estimation pipeline.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum IcseError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("rank deficiency: {0}")]
    Rank(String),

    #[error("invalid loss specification: {0}")]
    LossSpec(String),

    #[error("infeasible constraint system: {0}")]
    Infeasible(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("too many constraints for pattern enumeration: {0}")]
    Capacity(String),

    #[error("all pattern weights vanish: {0}")]
    DegenerateWeights(String),

    #[error("invalid covariance: {0}")]
    Covariance(String),

    #[error("simulation study failed: {0}")]
    Study(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, IcseError>;

impl IcseError {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        IcseError::Shape(msg.into())
    }

    pub(crate) fn rank(msg: impl Into<String>) -> Self {
        IcseError::Rank(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        IcseError::Numerical(msg.into())
    }
}
