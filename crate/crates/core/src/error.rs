use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("holder exponent chain violated: {0}")]
    ParameterChain(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("time {time} outside window [{start}, {end}]")]
    OutsideWindow { time: f64, start: f64, end: f64 },

    #[error("covariance factorization failed: {0}")]
    Factorization(String),

    #[error("no contraction found up to rho = {max_rho} (best factor {best_factor})")]
    NoContraction { max_rho: f64, best_factor: f64 },

    #[error("fixed-point iteration did not converge after {max_iters} iterations from {n_starts} starts")]
    NonConvergence {
        max_iters: usize,
        n_starts: usize,
        residual_traces: Vec<Vec<f64>>,
    },

    #[error("endpoint mismatch {0:e} exceeds tolerance")]
    EndpointMismatch(f64),

    #[error("empty set")]
    EmptySet,

    #[error("config: {0}")]
    Config(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
