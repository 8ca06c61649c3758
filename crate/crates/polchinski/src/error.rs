use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("time {t} outside schedule domain [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("instability: {0}")]
    Unstable(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("config error at {pointer}: {message}")]
    Config { pointer: String, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
