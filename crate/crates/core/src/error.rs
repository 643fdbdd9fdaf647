use thiserror::Error;

/// Errors raised by the solvers and estimators.
#[derive(Debug, Error)]
pub enum DroError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("divergence `{name}` fails validation: {reason}")]
    InvalidDivergence { name: String, reason: String },

    #[error("infeasible constraint set: {0}")]
    Infeasible(String),

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("numerical overflow: {0}")]
    Overflow(String),

    /// The iteration cap was hit; `last_iterate` is the final point visited.
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
        trace: Vec<f64>,
    },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("{dropped} of {total} bootstrap replicates failed (limit 10%): {first}")]
    TooManyFailures {
        dropped: usize,
        total: usize,
        first: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed frontier file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, DroError>;
