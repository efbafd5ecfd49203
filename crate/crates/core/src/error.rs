use thiserror::Error;

/// Errors surfaced by the library.
///
/// Infeasibility of an optimisation block is usually a value, not an error;
/// the variants here cover malformed inputs and global infeasibility that the
/// caller has to report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("user count must be even and positive, got {0}")]
    OddUserCount(usize),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("distance must be positive after clamping, got {0} km")]
    NonPositiveDistance(f64),

    #[error("bandwidth must be positive, got {0} Hz")]
    NonPositiveBandwidth(f64),

    #[error("compression ratio must lie in (0, 1], got {0}")]
    InvalidCompressionRatio(f64),

    #[error("envelope needs at least two distinct compression ratios")]
    DegenerateEnvelope,

    #[error("graph has an odd number of nodes ({0})")]
    OddNodeCount(usize),

    #[error("matching instance too large for the exact matcher ({0} nodes)")]
    MatchingTooLarge(usize),

    #[error("assignment size mismatch: {pairs} pairs for {groups} groups")]
    AssignmentSizeMismatch { pairs: usize, groups: usize },

    #[error("no feasible perfect matching over the pruned edge set")]
    NoFeasibleMatching,

    #[error("no feasible initial allocation for this draw: {0}")]
    InfeasibleDraw(String),

    #[error("profile set covers {found} pairs, expected {expected}")]
    ProfileCount { found: usize, expected: usize },

    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("serialisation error: {0}")]
    Serde(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
