use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("data error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Data { line: Option<usize>, msg: String },

    #[error("unknown type `{0}`")]
    UnknownType(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data { line: None, msg: msg.into() }
    }

    pub fn data_at(line: usize, msg: impl Into<String>) -> Self {
        Error::Data { line: Some(line), msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
