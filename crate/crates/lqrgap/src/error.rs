use thiserror::Error;

/// Errors surfaced by solvers, estimators and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric (max asymmetry {max_asym:e} exceeds tolerance {tol:e})")]
    NotSymmetric { max_asym: f64, tol: f64 },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("matrix is not stable: spectral radius {rho} >= 1")]
    Unstable { rho: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("rank error: {0}")]
    Rank(String),

    #[error("spectrum error: {0}")]
    Spectrum(String),

    #[error("iteration limit reached after {iters} iterations (residual {residual:e})")]
    IterationLimit { iters: usize, residual: f64 },

    #[error("trajectory diverged at step {step} (|entry| > {limit:e})")]
    Divergence { step: usize, limit: f64 },

    #[error("model assumption violated: {0}")]
    ModelAssumption(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    ConfigParse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
