use thiserror::Error;

use crate::types::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dataset failed validation with {} violation(s); first: {}", .0.len(), .0.first().map(|v| v.to_string()).unwrap_or_default())]
    Validation(Vec<Violation>),
    #[error("input rejected with {} problem(s); first: {}", .0.len(), .0.first().map(|v| v.to_string()).unwrap_or_default())]
    Rejected(Vec<crate::io::RowIssue>),
    #[error("scenario mismatch: {0}")]
    Scenario(String),
    #[error("censoring weight undefined at t = {time}: 1 - G(t-) is zero")]
    WeightUndefined { time: f64 },
    #[error("covariate length mismatch: model expects {expected}, got {got}")]
    CovariateMismatch { expected: usize, got: usize },
    #[error("partial likelihood maximization did not converge after {iterations} iterations (max |gradient| = {max_gradient:.3e}): {detail}")]
    NonConvergence {
        iterations: usize,
        max_gradient: f64,
        detail: String,
    },
    #[error("singular information matrix: {0}")]
    Singular(String),
    #[error("no events of the requested type to fit")]
    NoEvents,
    #[error("evaluation grids differ")]
    GridMismatch,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unknown model specification `{0}`")]
    UnknownModel(String),
    #[error("malformed input file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::Validation(_)
            | Error::Rejected(_)
            | Error::Scenario(_)
            | Error::CovariateMismatch { .. }
            | Error::GridMismatch
            | Error::UnknownModel(_)
            | Error::Parse(_)
            | Error::Csv(_) => 2,
            Error::NonConvergence { .. }
            | Error::Singular(_)
            | Error::NoEvents
            | Error::WeightUndefined { .. }
            | Error::Domain(_) => 3,
            _ => 1,
        }
    }
}
