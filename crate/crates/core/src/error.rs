use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("relevant region degenerate: lambda reached {lambda:.3e} without an accepted sample")]
    RegionDegenerate { lambda: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("external objective: {0}")]
    External(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_mismatch(what: &str, expected: usize, got: usize) -> Error {
    Error::InvalidArgument(format!("{what}: expected length {expected}, got {got}"))
}
