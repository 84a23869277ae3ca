//! Error type shared by every module in the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// An argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The request would exceed a hard resource cap (e.g. the 2^N enumeration limit).
    #[error("capacity exceeded: n_sites = {n_sites} is above the cap {cap}")]
    CapacityExceeded { n_sites: usize, cap: usize },

    /// The operation is defined but not supported at these arguments;
    /// the message names the supported route.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// An iterative solver ran out of its iteration budget. Carries the
    /// residual trajectory so callers can diagnose the failure.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    ConvergenceFailure {
        iterations: usize,
        residual: f64,
        trajectory: Vec<f64>,
    },

    /// The fixed-point problem has multiple roots at these parameters and
    /// picking one silently would misrepresent the regime.
    #[error("ambiguous root: q(beta, 0) has multiple fixed points for beta = {beta} > 1")]
    AmbiguousRoot { beta: f64 },

    /// A numeric evaluation produced a non-finite value.
    #[error("numeric failure: {0}")]
    NumericFailure(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
