use std::fmt;

use crate::record::{PeId, StepId};

/// Truncated or malformed record bytes.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("decode error at byte offset {offset}: {reason}")]
pub struct DecodeError {
    pub offset: usize,
    pub reason: &'static str,
}

/// Failure reported by a user-supplied map or reduce function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserFnError(pub String);

impl fmt::Display for UserFnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UserFnError {}

impl From<DecodeError> for UserFnError {
    fn from(e: DecodeError) -> Self {
        UserFnError(e.to_string())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("record field of {len} bytes exceeds the 4-byte length prefix")]
    Encode { len: usize },

    #[error(transparent)]
    Decode(#[from] DecodeError),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("partition error: {0}")]
    Partition(String),

    #[error("map function failed on {pe} at {step}, record {index}: {source}")]
    Map {
        pe: PeId,
        step: StepId,
        index: usize,
        source: UserFnError,
    },

    #[error("reduce function failed on {pe} at {step}, key {key:?}: {source}")]
    Reduce {
        pe: PeId,
        step: StepId,
        key: Vec<u8>,
        source: UserFnError,
    },

    #[error("unrecoverable failure of {failed:?} at {step}: {reason}")]
    Unrecoverable {
        step: StepId,
        failed: Vec<PeId>,
        reason: String,
    },

    #[error("invalid failure plan: {0}")]
    FailurePlan(String),

    #[error("job did not terminate within {steps} steps")]
    NonTermination { steps: u64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
