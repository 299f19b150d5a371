use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("tree depth {depth} in {dim} dimensions exceeds the supported cluster count")]
    DepthOverflow { dim: usize, depth: usize },
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("target accuracy {eps:e} does not exceed the working unit roundoff {unit_roundoff:e}")]
    AccuracyBelowRoundoff { eps: f64, unit_roundoff: f64 },
    #[error("singular value decomposition failed: {0}")]
    Svd(String),
    #[error("format table: {0}")]
    FormatTable(String),
    #[error("container: {0}")]
    Container(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
