//! Experiment runner and tooling around the `substream` library.

pub mod config;
pub mod instance;
pub mod runner;
pub mod verify;

pub use config::ExperimentConfig;
pub use instance::{Instance, InstanceFile};
pub use runner::{run, Format, RunOptions, RunOutput, TrialRecord};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl CliError {
    /// 1 for bad input, 2 for a failed invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Invariant(_) => 2,
        }
    }
}

impl From<substream::Error> for CliError {
    fn from(e: substream::Error) -> Self {
        match e {
            substream::Error::Invariant(_) | substream::Error::NotPSystemWitness(_) => CliError::Invariant(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}
