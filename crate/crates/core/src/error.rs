use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A custom weight table does not reach the requested index.
    #[error("weight table has {len} entries but index {index} was requested")]
    WeightTableTooShort { len: usize, index: usize },

    /// Structural coefficients violate the Sobolev ellipsoid constraint.
    #[error("coefficients lie outside the ellipsoid: weighted norm {norm} exceeds radius {rho}")]
    OutsideEllipsoid { norm: f64, rho: f64 },

    /// The joint density implied by the operator coefficients can become negative.
    #[error("operator coefficients give a negative density floor ({floor})")]
    NegativeDensity { floor: f64 },

    /// A sample file row could not be parsed or failed validation.
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    /// Configuration could not be parsed or is inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
