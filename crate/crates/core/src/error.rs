use thiserror::Error;

use crate::chain::BlockRef;
use crate::oracle::Caller;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown block {0}")]
    UnknownBlock(BlockRef),

    #[error("oracle query budget exhausted for {0}")]
    BudgetExhausted(Caller),

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("round {0} is not recorded")]
    RoundOutOfRange(u64),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
