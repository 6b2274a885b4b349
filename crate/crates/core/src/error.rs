use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in input")]
    NonFinite,

    #[error("matrix is singular after exhausting the jitter ladder")]
    Singular,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("invalid bandwidth {0}; must be positive and finite")]
    InvalidBandwidth(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("solver iterates diverged (norm {norm:.3e})")]
    Unbounded { norm: f64 },

    #[error("cannot split {n} rows evenly into {shards} shards")]
    IndivisibleN { n: usize, shards: usize },

    #[error("bad magic number")]
    BadMagic,

    #[error("checksum mismatch")]
    BadChecksum,

    #[error("truncated input")]
    Truncated,

    #[error("unknown message type {0}")]
    UnknownType(u8),

    #[error("unknown broadcast mode {0}")]
    BadMode(u8),

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("worker {0} timed out")]
    WorkerTimeout(usize),

    #[error("worker {0} crashed or closed its connection")]
    WorkerCrashed(usize),

    #[error("unexpected reply from worker {worker}: {detail}")]
    UnexpectedReply { worker: usize, detail: String },

    #[error(
        "aggregated Hessian is singular in round {round}; too few rows fall inside the \
         bandwidth window, try a larger C0"
    )]
    AggregationSingular { round: u32 },

    #[error("root bracketing failed")]
    BracketingFailed,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
