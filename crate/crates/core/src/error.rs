use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    /// Input violates a documented precondition (domain, shape or finiteness).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two grid-sampled objects that must share a grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A numerical routine failed to reach its accuracy or convergence target.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// A trajectory left the representable range.
    #[error("solution blow-up at step {step} of replica {replica}")]
    BlowUp { replica: u64, step: usize },

    /// A fixed-point iteration moved apart on consecutive sweeps.
    #[error("fixed-point iteration is not contracting (sweep {sweep})")]
    NonContraction { sweep: usize },

    /// I/O or serialization problem while reading/writing an artifact.
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::NumericalFailure(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
