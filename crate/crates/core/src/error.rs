use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty point set")]
    Empty,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point {index} has non-finite coordinates")]
    NonFinitePoint { index: usize },

    #[error("weight {index} is not strictly positive and finite: {value}")]
    InvalidWeight { index: usize, value: f64 },

    #[error("time must be strictly positive, got {0}")]
    NonPositiveTime(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Clarke subdifferential requested where only the outer hull is computable.
    #[error("only the outer Clarke hull is available on the simultaneous interface for lambda > 1")]
    OnlyOuterHullAvailable,

    #[error("point lies on the nondifferentiability interface")]
    NonsmoothPoint,

    #[error("minimum-norm solver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("integration produced a non-finite state at step {step}")]
    NonFiniteState { step: usize },

    #[error("sliding projection failed at step {step}")]
    SlidingFailure { step: usize },

    #[error("missing drift records on trajectory")]
    MissingDrift,

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveTime(t))
    }
}
