use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range for extent {extent}")]
    OutOfRange { index: usize, extent: usize },

    #[error("input contains non-finite values")]
    NonFinite,

    #[error("non-negative least squares did not converge after {iterations} iterations")]
    NnlsNonConvergence { iterations: usize },

    #[error("block term {term}: {source}")]
    Term { term: usize, source: Box<Error> },

    #[error("training group {group}: {source}")]
    Group { group: usize, source: Box<Error> },

    #[error("malformed {format} data: {reason}")]
    Format { format: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(format: &'static str, reason: impl Into<String>) -> Self {
        Error::Format { format, reason: reason.into() }
    }

    /// Attach the index of the block term whose update failed.
    pub fn in_term(self, term: usize) -> Self {
        Error::Term { term, source: Box::new(self) }
    }

    pub fn in_group(self, group: usize) -> Self {
        Error::Group { group, source: Box::new(self) }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
