use thiserror::Error;

/// Errors raised by every module of the crate.
///
/// The variants are grouped so that the command line front end can map them
/// onto stable exit codes (see [`Error::exit_code`]).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed or out-of-range input supplied by the caller.
    #[error("invalid input: {0}")]
    Input(String),

    /// A configured enumeration/sample cap would be exceeded.
    #[error("{what}: {count} exceeds cap {cap}")]
    Cap { what: String, count: u128, cap: u128 },

    #[error("no admissible path from symbol {from} to symbol {to}")]
    NoPath { from: usize, to: usize },

    #[error("transition matrix is not irreducible (subshift not transitive)")]
    NotTransitive,

    #[error("transition matrix is not aperiodic (period {period})")]
    NotMixing { period: usize },

    /// The measure gives zero mass to the requested box.
    #[error("box {0} carries no mass")]
    EmptyFrame(String),

    #[error("degenerate result: {0}")]
    Degenerate(String),

    #[error("map {index} is not a contraction (factor {factor})")]
    InvalidContraction { index: usize, factor: f64 },

    #[error("unsupported for this system: {0}")]
    Unsupported(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn cap(what: impl Into<String>, count: u128, cap: u128) -> Self {
        Error::Cap {
            what: what.into(),
            count,
            cap,
        }
    }

    /// Process exit code: 1 = input, 2 = cap, 3 = internal/other.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_)
            | Error::Unsupported(_)
            | Error::InvalidContraction { .. }
            | Error::NoPath { .. }
            | Error::NotTransitive
            | Error::NotMixing { .. } => 1,
            Error::Cap { .. } => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
