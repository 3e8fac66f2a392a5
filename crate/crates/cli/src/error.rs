use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Stream(#[from] std::io::Error),
    #[error("line 1: expected version marker `{expected}`, found `{found}`")]
    Version { expected: &'static str, found: String },
    #[error("line {line}: header mismatch, expected `{expected}`, found `{found}`")]
    Header {
        line: u64,
        expected: String,
        found: String,
    },
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("variance columns must be present on every record or on none")]
    MixedVariance,
}

pub type FormatResult<T> = Result<T, FormatError>;
