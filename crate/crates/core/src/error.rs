use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid rational map: {0}")]
    InvalidMap(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The simultaneous root finder did not reach its tolerance. The residual
    /// polynomial is the coefficient list (constant term first) it was working on,
    /// empty when the polynomial was only available implicitly.
    #[error("root finder failed to converge after {iterations} iterations (max correction {max_correction:e})")]
    RootFinding {
        iterations: usize,
        max_correction: f64,
        residual_poly: Vec<[f64; 2]>,
    },

    #[error("power iteration did not converge after {} iterations (last residual {:e})", .residuals.len(), .residuals.last().copied().unwrap_or(f64::NAN))]
    NoConvergence { residuals: Vec<f64> },

    #[error("periodic point count audit failed: found {found} of {expected}")]
    CountShortfall { found: usize, expected: usize },

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("unbalanced measures: masses {0} and {1}")]
    Unbalanced(f64, f64),

    #[error("cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
