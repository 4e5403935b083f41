use thiserror::Error;

/// Errors raised while building, querying or (de)serializing an index.
#[derive(Debug, Error)]
pub enum Error {
    #[error("position {pos} out of range for length {len}")]
    OutOfRange { pos: u64, len: u64 },
    #[error("{what} not found")]
    NotFound { what: String },
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("leaf {0} does not address an occupied cell")]
    InvalidLeaf(usize),
    #[error("symbol {0} is not in the vocabulary")]
    UnknownSymbol(u64),
    #[error("corrupt data: {0}")]
    Corrupt(String),
    #[error("feature not enabled: {0}")]
    Unsupported(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn corrupt(msg: impl Into<String>) -> Self {
        Error::Corrupt(msg.into())
    }

    pub(crate) fn not_found(what: impl Into<String>) -> Self {
        Error::NotFound { what: what.into() }
    }
}
