use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Rejected constructor or operation input.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Time stepping produced a non-finite or runaway state.
    #[error("integration unstable at t = {time}: {reason}")]
    Unstable { time: f64, reason: String },

    /// A fit or estimate was requested on data that cannot support it.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Configuration problems; every violation found is listed.
    #[error("invalid configuration:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
