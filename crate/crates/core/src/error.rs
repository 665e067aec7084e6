use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("cycle must contain at least one Q2 service (k >= 1), got k = {0}")]
    InvalidCycle(u32),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("value iteration did not converge within {iterations} sweeps (last sup-norm delta {last_delta:e})")]
    NoConvergence { iterations: usize, last_delta: f64 },

    #[error("serving Q2 is optimal at the big-M state ({x}, {y}); xmax is too small")]
    TruncationTooSmall { x: usize, y: usize },

    #[error("state ({x}, {y}) lies outside the value grid (xmax = {xmax})")]
    OutsideGrid { x: u64, y: u64, xmax: usize },

    #[error("value table file: {0}")]
    TableFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
