use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    /// A quantile was requested at probability exactly 0 or 1.
    #[error("quantile saturates at p = {0}")]
    Saturated(f64),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: &'static str },

    /// A squared symplectic eigenvalue fell below the vacuum limit.
    #[error("non-physical covariance: squared symplectic eigenvalue {0} < 1")]
    NonPhysical(f64),

    #[error("degenerate channel: T * sigma_x^2 = 0")]
    DegenerateChannel,

    #[error("not enough accepted symbols: have {available}, need {required}")]
    InsufficientAccepts { available: usize, required: usize },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: &'static str) -> Self {
        Error::InvalidParameter { field, reason }
    }
}
