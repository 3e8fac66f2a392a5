use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("measurement noise is not positive semi-definite")]
    NonPsdNoise,
}
