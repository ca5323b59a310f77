use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid input parameters or geometry.
    #[error("configuration error: {0}")]
    Config(String),

    /// A value outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { solver: &'static str, iterations: usize, residual: f64 },

    #[error("divergence at step {step} (t = {t}): {what}")]
    Divergence { step: usize, t: f64, what: String },

    /// Raised by the stationary obstacle solve when the flow grows without
    /// bound, which happens for `a ≥ λ₁(Ω₀)`.
    #[error("unbounded growth at t = {t}: l2 norm {l2:.3e} exceeds {limit:.3e}")]
    Unbounded { t: f64, l2: f64, limit: f64 },

    #[error("snapshot format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
