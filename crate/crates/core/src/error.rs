use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bid: {0}")]
    InvalidBid(String),
    #[error("invalid type profile: {0}")]
    InvalidProfile(String),
    #[error("candidate outcome set is empty")]
    EmptyCandidates,
    #[error("chosen outcome {0} is not among the candidates")]
    OutcomeNotCandidate(String),
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),
    #[error("trained model has non-positive w1 = {0}")]
    NonPositiveW1(f64),
    #[error("every candidate model was discarded (w1 <= 0)")]
    AllModelsDiscarded,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
