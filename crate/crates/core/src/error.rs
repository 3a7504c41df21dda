use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A theorem hypothesis fails for the requested configuration.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("parse error at position {pos}: unexpected token `{token}` ({reason})")]
    Parse {
        token: String,
        pos: usize,
        reason: String,
    },
    /// A cost or memory guard refused the run.
    #[error("guard exceeded: {0}")]
    Guard(String),
    /// A self-check failed; results must not be trusted.
    #[error("inconsistency: {0}")]
    Inconsistency(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
