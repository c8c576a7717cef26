use std::path::PathBuf;

use dualrec::corpus::CorpusError;
use dualrec::diff::DiffError;
use dualrec::eval::EvalError;
use dualrec::model::ModelError;
use dualrec::synth::SynthError;
use thiserror::Error;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_DIVERGED: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot parse config: {0}")]
    ConfigParse(#[from] toml::de::Error),
    #[error("cannot access {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::ConfigParse(_) => EXIT_USAGE,
            CliError::Model(ModelError::InvalidConfig(_)) => EXIT_USAGE,
            CliError::Model(ModelError::Diverged { .. }) => EXIT_DIVERGED,
            CliError::Synth(SynthError::InvalidSpec(_)) => EXIT_USAGE,
            _ => EXIT_DATA,
        }
    }
}
