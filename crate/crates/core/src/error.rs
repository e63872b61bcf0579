use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Cholesky factorization failed at every jitter level (last tried {last_jitter:e})")]
    FactorizationFailure { last_jitter: f64 },

    #[error("duplicate training point (distance {distance:e} below tolerance {tolerance:e})")]
    DuplicatePoints { distance: f64, tolerance: f64 },

    #[error("posterior variance {0:e} is negative beyond rounding tolerance")]
    NegativeVariance(f64),

    #[error("evaluation budget of {budget} exhausted")]
    BudgetExhausted { budget: usize },

    #[error("degenerate search domain: {0}")]
    DegenerateDomain(String),

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("zero sample variance in summary component {component}")]
    ZeroVariance { component: &'static str },

    #[error("sampler failure: {0}")]
    Sampler(String),

    #[error("normalization overflow: {0}")]
    Overflow(String),

    #[error("external objective: {0}")]
    External(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

pub(crate) fn check_finite(x: &[f64], what: &str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} {x:?}")))
    }
}
