use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("element {index} out of range for ground set of size {n}")]
    OutOfRange { index: usize, n: usize },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("capability exceeded: {0}")]
    Capability(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("not a p-system witness: {0}")]
    NotPSystemWitness(String),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn capability(msg: impl Into<String>) -> Self {
        Error::Capability(msg.into())
    }

    pub fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }

    pub fn is_invariant(&self) -> bool {
        matches!(self, Error::Invariant(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_range(set: &[usize], n: usize) -> Result<()> {
    match set.iter().find(|&&u| u >= n) {
        Some(&index) => Err(Error::OutOfRange { index, n }),
        None => Ok(()),
    }
}
