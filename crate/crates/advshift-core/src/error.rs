use alloc::string::String;
use core::fmt;

/// Failure modes surfaced by the library.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// Two operands with incompatible dimensions.
    DimensionMismatch { left: usize, right: usize },
    /// An operation that needs a nonzero vector got one with zero norm.
    /// The payload names the quantity that could not be formed.
    ZeroNorm(&'static str),
    /// A particle update left the finite float range.
    NonFinite { particle: usize, step: u64 },
    /// A scalar-reduction state left the finite float range.
    NonFiniteScalar { step: u64 },
    /// An input outside its documented domain.
    InvalidParameter(String),
    /// Not enough usable data for the requested fit or summary.
    InsufficientData(String),
    /// A sample-based operation received no samples.
    EmptySamples,
    /// Every particle in the ensemble is a fixed point of the dynamic.
    AllDegenerate,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { left, right } => {
                write!(f, "dimension mismatch: {left} vs {right}")
            }
            Error::ZeroNorm(what) => write!(f, "zero norm: {what}"),
            Error::NonFinite { particle, step } => {
                write!(f, "non-finite update for particle {particle} at step {step}")
            }
            Error::NonFiniteScalar { step } => {
                write!(f, "non-finite scalar state at step {step}")
            }
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::InsufficientData(msg) => write!(f, "insufficient data: {msg}"),
            Error::EmptySamples => write!(f, "empty sample list"),
            Error::AllDegenerate => {
                write!(f, "every particle is a fixed point; nothing to normalize")
            }
        }
    }
}

impl core::error::Error for Error {}
