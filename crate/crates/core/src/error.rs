use thiserror::Error;

use crate::optimizer::TracePoint;

/// Errors produced by the model, estimators, solvers and simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration field violates its invariant.
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A geometric or numeric precondition failed (e.g. zero link distance).
    #[error("domain error: {0}")]
    Domain(String),

    /// The solver inputs cannot produce a meaningful bound or step size.
    #[error("solver configuration error: {0}")]
    SolverConfig(String),

    #[error("fixed-point iteration did not converge after {iterations} iterations (last residual {last_residual:.6e})")]
    NonConvergence {
        iterations: usize,
        last_residual: f64,
        trace: Vec<TracePoint>,
    },

    /// A frame saw more users than the runaway guard allows; usually a mis-solved price.
    #[error("runaway policy: frame exceeded {limit} users without a delivery")]
    RunawayPolicy { limit: u64 },

    #[error("lookup grid format error: {0}")]
    GridFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
