use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("ideals belong to different fields ({0} vs {1})")]
    FieldMismatch(i64, i64),
    #[error("division by zero")]
    DivisionByZero,
    #[error("search bound {0} exhausted: {1}")]
    SearchExhausted(u64, String),
    #[error("missing eigenvalue at prime {0}")]
    MissingPrime(String),
    #[error("oracle has no value for {0}")]
    Oracle(String),
    #[error("consistency failure: {0}")]
    Consistency(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("cannot read {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}
