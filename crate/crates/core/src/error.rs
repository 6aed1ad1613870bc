use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("derivative order {order} exceeds the supported maximum {max}")]
    UnsupportedOrder { order: usize, max: usize },

    #[error("quadrature did not converge: error estimate {estimate:e} above tolerance {tolerance:e}")]
    Quadrature { estimate: f64, tolerance: f64 },

    #[error("closest-point projection failed for point ({}, {})", point[0], point[1])]
    ProjectionFailure { point: [f64; 2] },

    #[error("tube radius {s} exceeds the safe tube radius {limit}")]
    OutOfTube { s: f64, limit: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("weight does not support: {0}")]
    UnsupportedWeight(String),

    #[error("deficit curve covers s up to {available}, but {needed} is required")]
    Coverage { needed: f64, available: f64 },

    #[error("ill-conditioned fit (condition estimate {condition:e}): {message}")]
    Conditioning { condition: f64, message: String },

    #[error("not enough samples for the fit: {0}")]
    InsufficientSamples(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
