//! Crate-wide error type.
//!
//! Validation failures (bad arguments, malformed inputs) and execution
//! failures (infeasible parameter regimes, exhausted data) share one enum so
//! that callers can match on the failure class; the CLI maps the two classes
//! to distinct exit codes.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("point has dimension {got}, problem has dimension {want}")]
    DimensionMismatch { want: usize, got: usize },

    #[error("point lies outside the problem box (radius {radius})")]
    OutOfDomain { radius: f64 },

    #[error("noise scale {scale} drives derived constants past the cap {cap}")]
    NoiseScaleTooLarge { scale: f64, cap: f64 },

    #[error("dataset has {remaining} samples left, batch needs {requested}")]
    InsufficientData { requested: u64, remaining: u64 },

    #[error("infeasible calibration: first-epoch batch {batch} exceeds dataset size {n}")]
    Infeasible { batch: u64, n: u64 },

    #[error("trace holds no candidate iterates")]
    EmptyTrace,

    #[error("tail check needs at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },

    #[error("escape probe needs a strict saddle start: {reason}")]
    NotASaddle { reason: String },

    #[error("eigenvalue iteration failed to converge within {max_iters} iterations")]
    EigenNoConvergence { max_iters: usize },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid grid spec: {0}")]
    InvalidGrid(String),

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad user input (configs, arguments, malformed
    /// files) as opposed to failures that arise while executing a valid request.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::DimensionMismatch { .. }
                | Error::OutOfDomain { .. }
                | Error::NoiseScaleTooLarge { .. }
                | Error::TooFewSamples { .. }
                | Error::InvalidConfig(_)
                | Error::InvalidGrid(_)
                | Error::InvalidRecord(_)
                | Error::Json(_)
        )
    }
}
