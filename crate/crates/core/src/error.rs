use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sector dimension {dimension} exceeds the cap of {cap} basis states")]
    SectorTooLarge { dimension: u128, cap: usize },

    #[error("layout error: {0}")]
    Layout(String),

    #[error("operator on party {party} couples local particle numbers {from} and {to}")]
    SsrViolation { party: usize, from: usize, to: usize },

    #[error("operands live on different sector bases")]
    BasisMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("expectation value has imaginary residual {residual:e}")]
    NonReal { residual: f64 },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("enumeration over {parties} parties exceeds the cap of {cap}")]
    EnumerationTooLarge { parties: usize, cap: usize },

    #[error("objective is not finite at angles {angles:?}")]
    Numerical { angles: Vec<f64> },

    #[error("invalid density operator: {0}")]
    InvalidDensity(String),
}
