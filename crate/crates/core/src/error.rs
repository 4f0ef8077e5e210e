use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the laboratory can report.
///
/// The variants are grouped by how a caller is expected to react: structural
/// problems with the input, guards that refuse a request outright, and budget
/// overruns for exhaustive computations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed profile: {0}")]
    Structural(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid matching: {0}")]
    InvalidMatching(String),

    #[error("profile fails {normalization} normalization: {detail}")]
    Normalization {
        normalization: &'static str,
        detail: String,
    },

    #[error("row {row} of the profile contains tied values; apply the tie-break transform first")]
    TiesPresent { row: usize },

    #[error("{what} is limited to n <= {max}, got n = {n}; {hint}")]
    TooLarge {
        what: &'static str,
        n: usize,
        max: usize,
        hint: &'static str,
    },

    #[error("{0}")]
    Refused(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mechanism `{mechanism}` lacks required capability: {capability}")]
    Capability {
        mechanism: String,
        capability: &'static str,
    },

    #[error("{what} needs {count} evaluations, above the budget of {budget}")]
    BudgetExceeded {
        what: &'static str,
        count: u128,
        budget: u128,
    },

    #[error("optimal welfare is zero; the approximation ratio is undefined")]
    ZeroOptimum,

    #[error("profile is not ordered: agent {agent} disagrees with agent 1's preference order")]
    NotOrdered { agent: usize },
}

impl Error {
    pub(crate) fn refused(msg: impl Into<String>) -> Self {
        Error::Refused(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
