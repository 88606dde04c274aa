use thiserror::Error;

use crate::optimize::{ChainPath, StartFailure};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("parameter coordinate {coordinate} ({name}) = {value} is outside its domain: {reason}")]
    Domain {
        coordinate: usize,
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("parameter dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("x = {x} lies outside the support of the {family} family")]
    Support { x: f64, family: &'static str },

    #[error(
        "quadrature did not converge: estimated error {achieved:e} > tolerance {tolerance:e} \
         after {evaluations} evaluations"
    )]
    Quadrature {
        achieved: f64,
        tolerance: f64,
        evaluations: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("empty dataset")]
    EmptyData,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("objective is not finite at the starting point {theta:?}")]
    StartRejected { theta: Vec<f64> },

    #[error("global search failed: none of {} starts converged", failures.len())]
    GlobalSearchFailed { failures: Vec<StartFailure> },

    #[error("chain broken at lambda = {lambda}: {reason}")]
    ChainBroken {
        lambda: f64,
        reason: String,
        partial: Box<ChainPath>,
    },

    #[error("information matrix is numerically singular (condition number {condition:e})")]
    SingularInformation { condition: f64 },
}

impl Error {
    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Quadrature { .. }
                | Error::StartRejected { .. }
                | Error::GlobalSearchFailed { .. }
                | Error::ChainBroken { .. }
                | Error::SingularInformation { .. }
        )
    }
}
