use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("grid alignment error: {0}")]
    GridAlignment(String),
    #[error("weight error: {0}")]
    Weight(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("singularity error: {0}")]
    Singularity(String),
    #[error("backend error: {0}")]
    Backend(String),
    #[error("size error: {0}")]
    Size(String),
    #[error("sparsity error: {0}")]
    Sparsity(String),
    #[error("decomposition error: {0}")]
    Decomposition(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
