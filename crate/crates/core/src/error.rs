use thiserror::Error;

use crate::circuit::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid program: {0}")]
    InvalidProgram(String),
    #[error("invalid code parameters: {0}")]
    CodeParams(String),
    #[error("lattice: {0}")]
    Lattice(String),
    #[error("schedule: {0}")]
    Schedule(String),
    #[error("partition: {0}")]
    Partition(String),
    #[error("compile: {0}")]
    Compile(String),
    #[error("simulation: {0}")]
    Sim(String),
    #[error("decode: {0}")]
    Decode(String),
    #[error("experiment: {0}")]
    Experiment(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
