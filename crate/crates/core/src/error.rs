use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two operands disagree on their dimensions.
    ShapeMismatch { expected: String, found: String },
    /// A requested object would exceed the configured element budget.
    Capacity { needed: u128, budget: u128 },
    /// An argument lies outside the domain of the operation.
    Domain(String),
    /// A distribution or stochastic matrix failed validation.
    InvalidDistribution(String),
    /// No balanced +-1 mapping keeps a positive correlation.
    NoValidMapping,
    /// The Q-matrix designer could not produce an improving pair.
    DesignerFailure(String),
    /// A decomposition does not reproduce its claimed target.
    Reconstruction { max_abs_err: f64 },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn shape(expected: impl fmt::Display, found: impl fmt::Display) -> Self {
        Error::ShapeMismatch {
            expected: alloc::format!("{expected}"),
            found: alloc::format!("{found}"),
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { expected, found } => {
                write!(f, "shape mismatch: expected {expected}, found {found}")
            }
            Error::Capacity { needed, budget } => {
                write!(f, "capacity exceeded: {needed} elements requested, budget is {budget}")
            }
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::InvalidDistribution(msg) => write!(f, "invalid distribution: {msg}"),
            Error::NoValidMapping => write!(f, "no balanced +-1 mapping with positive correlation"),
            Error::DesignerFailure(msg) => write!(f, "Q-matrix designer failed: {msg}"),
            Error::Reconstruction { max_abs_err } => {
                write!(f, "decomposition does not match its target (max abs error {max_abs_err:e})")
            }
        }
    }
}

impl core::error::Error for Error {}
