use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation (bad index, dimension
    /// mismatch, non-normalized state, non-unitary matrix).
    #[error("domain error: {0}")]
    Domain(String),
    /// The two parties' operators do not commute up to a global phase.
    #[error("operators {alice} and {bob} do not commute up to a global phase")]
    NonCommuting { alice: String, bob: String },
    /// A session or experiment configuration is invalid.
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
