use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported configuration M={m}, N={n}: {reason}")]
    UnsupportedConfiguration { m: usize, n: usize, reason: String },

    /// A precoder asked for a channel coefficient its CSIT state does not grant.
    #[error("CSIT contract violation: read of receiver {receiver} at slot {slot} from slot {read_at}")]
    ContractViolation { receiver: usize, slot: usize, read_at: usize },

    #[error("internal consistency: {0}")]
    InternalConsistency(String),

    /// The schedule did not hand a receiver the expected number of equations.
    #[error("scheme construction: {0}")]
    SchemeConstruction(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
