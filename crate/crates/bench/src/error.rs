use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config line {line}: {detail}")]
    Config { line: usize, detail: String },

    #[error("unknown key `{0}`")]
    UnknownKey(String),

    #[error("bad value for `{key}`: {detail}")]
    BadValue { key: String, detail: String },

    #[error("invalid experiment: {0}")]
    InvalidSpec(String),

    #[error(transparent)]
    Estimation(#[from] mdl_svm::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, BenchError>;
