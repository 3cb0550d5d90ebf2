use thiserror::Error;

/// Errors produced while validating domains, covariances, or run configurations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("covariance not admissible: {0}")]
    Admissibility(String),
}

pub type Result<T> = std::result::Result<T, Error>;
