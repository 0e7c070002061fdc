use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("system is not stable: spectral radius {0} >= 1")]
    Unstable(f64),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("power iteration did not converge after {iterations} iterations (last estimate {estimate})")]
    NoConvergence { iterations: usize, estimate: f64 },
    #[error("matrix is ill-conditioned (condition estimate {condition:e})")]
    Singular { condition: f64 },
    #[error("identifiability gap undefined: {0}")]
    UndefinedGap(&'static str),
    #[error("hull distance did not converge after {iterations} iterations; distance in [{lower:e}, {upper:e}]")]
    HullNoConvergence {
        iterations: usize,
        lower: f64,
        upper: f64,
    },
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
