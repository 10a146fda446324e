use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("incompatible right-hand side for singular operator: mean {mean:e} exceeds tolerance {tol:e}")]
    Compatibility { mean: f64, tol: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("time step {tau} exceeds the admissible bound tau_max = {tau_max} for this functional")]
    StepTooLarge { tau: f64, tau_max: f64 },

    #[error("operation not supported for this functional variant: {0}")]
    UnsupportedVariant(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
