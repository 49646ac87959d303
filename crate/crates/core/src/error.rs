use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("all trajectories are identical; median pairwise distance is zero")]
    DegenerateDistances,

    #[error("sample sizes must match: set A has {m} trajectories, set B has {n}")]
    SampleCountMismatch { m: usize, n: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("simulation blew up at step {step} (non-finite state)")]
    BlowUp { step: usize },

    #[error("gradient vanishes at the query state")]
    ZeroGradient,

    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },

    #[error("trajectory {id}: {message}")]
    RaggedTrajectory { id: String, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
