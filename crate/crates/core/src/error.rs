use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A value outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0} vs {1}")]
    Shape(usize, usize),

    /// The quantile design cannot be realized at this sample size.
    #[error("design error: {0}")]
    Design(String),

    /// An exhaustive enumeration would exceed its budget.
    #[error("enumeration budget exceeded: {needed} > {budget}")]
    Budget { needed: u128, budget: u128 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
