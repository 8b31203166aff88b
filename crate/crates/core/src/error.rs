use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An operation was evaluated outside its mathematical domain
    /// (zero wavevector, coincident centres, vanishing width, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("profile truncated: {0}")]
    ProfileTruncated(String),

    /// Problem size exceeds a hard guard (memory or O(N^6) work).
    #[error("size guard: {0}")]
    SizeGuard(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("branch basis undefined: {0}")]
    BranchBasisUndefined(String),

    #[error("branch suppressed: amplitude {0:e} below threshold")]
    BranchSuppressed(f64),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for violations of numerical guards rather than malformed input.
    pub fn is_numerical_guard(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::SizeGuard(_)
                | Error::ProfileTruncated(_)
                | Error::BranchBasisUndefined(_)
                | Error::BranchSuppressed(_)
        )
    }
}
