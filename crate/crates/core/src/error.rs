use thiserror::Error;

/// Errors raised by the calculus engine and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("horizon mismatch: {0} vs {1}")]
    HorizonMismatch(f64, f64),

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("grid incompatibility: {0}")]
    GridIncompatible(String),

    #[error("closed-form gamma norm is only available for the Hilbert (l2) codomain, got {0}")]
    NotHilbert(String),

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("total chaos degree {degree} exceeds the cap {cap}")]
    DegreeCap { degree: u32, cap: u32 },

    #[error("basis function {index} straddles t = {t}; refine the basis at t")]
    RefinementNeeded { index: usize, t: f64 },

    #[error("expression is not polynomial: {0}")]
    NotPolynomial(String),

    #[error("future dimension {dim} exceeds the quadrature cap {cap} and Monte Carlo fallback is disabled")]
    QuadratureCap { dim: usize, cap: usize },

    #[error("process is not adapted: {0}")]
    NotAdapted(String),

    #[error("enumeration depth {depth} exceeds the limit {limit}")]
    DepthTooLarge { depth: usize, limit: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("random variable is not known to be integrable: {0}")]
    NotIntegrable(String),

    #[error("payoff is not differentiable: {0}")]
    NonDifferentiable(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn dims(expected: usize, found: usize) -> Self {
        Error::DimensionMismatch { expected, found }
    }
}
