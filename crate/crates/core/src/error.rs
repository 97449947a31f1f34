use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("level {requested} exceeds the configured cap {cap} for k={k}")]
    DepthCap { k: u32, requested: usize, cap: usize },

    #[error("linear system with {unknowns} unknowns exceeds the solver cap of {cap}")]
    TooLarge { unknowns: usize, cap: usize },

    #[error("graph is disconnected from its boundary set")]
    Disconnected,

    #[error("singular linear system")]
    Singular,

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("integer overflow in {0}")]
    Overflow(&'static str),

    #[error("verification failed at {witness}: {detail}")]
    Verification { witness: String, detail: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn verification(witness: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Verification {
            witness: witness.into(),
            detail: detail.into(),
        }
    }
}
