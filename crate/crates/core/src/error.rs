use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("alpha must lie strictly between 0 and 1 (got {0})")]
    AlphaOutOfRange(String),
    #[error("beta must lie in (0, 1/2] (got {0})")]
    BetaOutOfRange(String),
    #[error("cannot parse rational {0:?}")]
    BadRational(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("coordinate already present")]
    DuplicateKey,
    #[error("coordinate not present")]
    NotFound,
    #[error("unknown colour id {0}")]
    UnknownColour(u32),
    #[error("position {pos} out of bounds for array of length {len}")]
    OutOfBounds { pos: usize, len: usize },
    #[error("query range is represented by a single node")]
    NotGeneral,
    #[error("label universe exhausted")]
    UniverseExhausted,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
