use thiserror::Error;

use crate::types::{PageId, Time};

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("infeasible")]
    Infeasible,
    #[error("out of regime: {0}")]
    Regime(String),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("pages {first} and {second} of group {group} are both fractional at time {time}")]
    PartitionViolation {
        group: usize,
        time: Time,
        first: PageId,
        second: PageId,
    },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("LP solver failure: {0}")]
    Lp(String),
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}
