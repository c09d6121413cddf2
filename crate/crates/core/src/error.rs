use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated an operation's precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("operation requires d = {required}, got d = {actual}")]
    UnsupportedDimension { required: u32, actual: u32 },

    #[error("grid carries no retained tree; resample with tree storage")]
    MissingTree,

    #[error("{count} configurations exceed the enumeration bound of {bound}")]
    TooManyConfigurations { count: String, bound: u64 },

    /// Malformed serialized grid.
    #[error("grid format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
