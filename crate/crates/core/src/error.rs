use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("model parse error: {0}")]
    ModelParse(String),

    #[error("invalid model element `{element}`: {reason}")]
    InvalidModel { element: String, reason: String },

    #[error("kinematic cycle through `{0}`")]
    Cycle(String),

    #[error("unknown frame `{0}`")]
    UnknownFrame(String),

    #[error("state mismatch: {0}")]
    InvalidState(String),

    #[error("singular matrix in {context} (condition/rank: {detail})")]
    Singular { context: String, detail: String },

    #[error("rank-deficient {what}: rank {rank} < {required}")]
    RankDeficient { what: String, rank: usize, required: usize },

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("iteration limit reached after {0} iterations")]
    MaxIterations(usize),

    #[error("invalid gains: {0}")]
    InvalidGains(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-finite or diverged state at step {step} (t = {time})")]
    NonFinite { step: usize, time: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
