use alloc::string::String;
use core::fmt;

/// Errors produced by the core algorithms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// An argument violates a precondition (bad size, bad mode, ...).
    InvalidArgument(String),
    /// Operands have incompatible shapes.
    DimensionMismatch(String),
    /// A value fell outside its admissible range (labels, histogram bins, ...).
    ValueOutOfRange(String),
    /// Two sequences that must agree in length do not.
    LengthMismatch(String),
    /// The patch scatter matrix has fewer significant directions than
    /// the number of requested filters.
    RankDeficient { requested: usize, attained: usize },
    /// No legal state path exists for the given observations.
    NoPath(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::DimensionMismatch(msg) => write!(f, "dimension mismatch: {msg}"),
            Error::ValueOutOfRange(msg) => write!(f, "value out of range: {msg}"),
            Error::LengthMismatch(msg) => write!(f, "length mismatch: {msg}"),
            Error::RankDeficient { requested, attained } => write!(
                f,
                "rank deficient: requested {requested} filters but the patch scatter has rank {attained}"
            ),
            Error::NoPath(msg) => write!(f, "no path: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
