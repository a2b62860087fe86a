use thiserror::Error;

/// Errors surfaced by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("impossible observation: {0}")]
    ImpossibleObservation(String),
    #[error("not explorable: {0}")]
    NotExplorable(String),
    #[error("outcome space too large: {0}")]
    OutcomeSpaceTooLarge(String),
    #[error("enumeration too large: {0}")]
    EnumerationTooLarge(String),
    #[error("N below floor: {0}")]
    BelowFloor(String),
    #[error("policy construction failed: {0}")]
    PolicyConstruction(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("audit failed: {0}")]
    AuditFailed(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad input rather than by a failed check.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::AuditFailed(_) | Error::Invariant(_) | Error::Io { .. }
        )
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
