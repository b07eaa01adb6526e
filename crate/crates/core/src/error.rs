use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("evaluation point {0} is negative")]
    NegativeArgument(f64),

    #[error("point x = {x} lies beyond the grid end {end}")]
    BeyondGrid { x: f64, end: f64 },

    #[error("invalid weight function: {0}")]
    InvalidWeight(String),

    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    #[error("kernel produced a non-finite value at t = {t}, s = {s}")]
    NonFiniteKernel { t: f64, s: f64 },

    #[error("cannot certify: {0}")]
    Certification(String),

    #[error("path diverged at step {step}: norm {norm:e} exceeds cap {cap:e}")]
    Divergence { step: usize, norm: f64, cap: f64 },

    #[error("fixed-point iteration did not converge after {iterations} iterations (last change {change:e})")]
    NoConvergence { iterations: usize, change: f64 },

    #[error("{diverged} of {total} paths diverged")]
    TooManyDiverged { diverged: usize, total: usize },

    #[error("invalid configuration field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("replay mismatch: {0}")]
    ReplayMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by user input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config { .. }
                | Error::InvalidArgument(_)
                | Error::InvalidWeight(_)
                | Error::InvalidNoise(_)
                | Error::Certification(_)
                | Error::ReplayMismatch(_)
                | Error::GridMismatch(_)
                | Error::DimensionMismatch { .. }
                | Error::BeyondGrid { .. }
                | Error::NegativeArgument(_)
        )
    }

    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::Divergence { .. } | Error::TooManyDiverged { .. })
    }
}
