use thiserror::Error;

/// Error taxonomy shared by every module in this crate.
///
/// `Config` and `Domain` mean the caller handed us something unusable
/// (bad hyperparameters, coordinates outside the unit domain); `Numeric`
/// means a computation produced a non-finite or otherwise meaningless
/// value; `Format` means a file on disk does not match its declared
/// layout. The CLI maps the first two to exit code 2 and the rest to 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
