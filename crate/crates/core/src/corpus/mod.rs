//! Dual-domain interaction corpus: loading, iterative N-core sampling,
//! dense-id assignment and deterministic train/valid/test splits.

mod dataset;
mod io;
mod ncore;
mod split;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dataset::{DatasetStats, DomainIndex, ProcessedDataset};
pub use io::{
    load_interactions, parse_interactions, read_dataset, write_dataset, write_interactions,
};
pub use ncore::{iterative_ncore_filter, FilterOutput};
pub use split::{split_dataset, SplitSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Domain {
    A,
    B,
}

impl Domain {
    pub const BOTH: [Domain; 2] = [Domain::A, Domain::B];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Domain::A => 0,
            Domain::B => 1,
        }
    }

    #[inline]
    pub fn other(self) -> Domain {
        match self {
            Domain::A => Domain::B,
            Domain::B => Domain::A,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::A => "A",
            Domain::B => "B",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(Domain::A),
            "B" | "b" => Ok(Domain::B),
            other => Err(CorpusError::InvalidInput(format!(
                "unknown domain `{other}`"
            ))),
        }
    }
}

/// One implicit-feedback event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawInteraction {
    pub user_key: String,
    pub item_key: String,
    pub domain: Domain,
    /// Used only to pick the surviving row when duplicates are collapsed.
    pub timestamp: Option<i64>,
}

impl RawInteraction {
    pub fn new(user_key: impl Into<String>, item_key: impl Into<String>, domain: Domain) -> Self {
        Self {
            user_key: user_key.into(),
            item_key: item_key.into(),
            domain,
            timestamp: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(CorpusError::InvalidInput(format!(
                "unknown split `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("no interactions found")]
    EmptyFile,
    #[error("domain {0} is empty after N-core filtering; n is too large for this input")]
    ExhaustedDataset(Domain),
    #[error("too few interactions to split: {0}")]
    TooFewInteractions(String),
    #[error("invalid split specification: {0}")]
    InvalidSplit(String),
    #[error("{0}")]
    InvalidInput(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Filter, index and split in one call.
pub fn prepare_dataset(
    inter_a: &[RawInteraction],
    inter_b: &[RawInteraction],
    n_core: usize,
    spec: &SplitSpec,
) -> Result<ProcessedDataset, CorpusError> {
    let filtered = iterative_ncore_filter(inter_a, inter_b, n_core)?;
    split_dataset(&ProcessedDataset::from_filtered(&filtered, n_core), spec)
}
