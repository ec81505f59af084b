use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("zero distance between nodes at {0:?}")]
    ZeroDistance([f64; 3]),
    #[error("cosine {0} outside [-1, 1]")]
    CosineOutOfRange(f64),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("index out of range: {what} = {index} (limit {limit})")]
    IndexOutOfRange { what: &'static str, index: usize, limit: usize },
    #[error("negative SINR {0}")]
    NegativeSinr(f64),
    #[error("total power is zero")]
    ZeroTotalPower,
    #[error("episode finished; call reset() before stepping")]
    EpisodeDone,
    #[error("environment has not been reset")]
    NotReset,
    #[error("non-finite action component at {0}")]
    NonFiniteAction(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}
