use crate::graphs::VertexId;

/// Errors shared by all simulation modules.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("vertex {0:?} is outside the window")]
    OutOfWindow(VertexId),
    #[error("{0}")]
    Domain(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
