//! Full forward pass, objective, negative sampling and training loop.

mod config;
mod loss;
mod network;
mod sampling;
mod train;

use thiserror::Error;

use crate::corpus::{CorpusError, Domain};
use crate::diff::DiffError;
use crate::eval::EvalError;
use crate::graph::GraphError;

pub use config::{Ablation, TrainConfig, DROPOUT_GRID, L2_GRID, LAMBDA_GRID, LR_GRID, TAU_GRID};
pub use loss::{bpr_loss, predict_score, LossBreakdown, LossTerms};
pub use network::{DomainEmbeddings, ForwardBundle, Layout, Mode, Model};
pub use sampling::{
    epoch_batches, sample_negative, sample_negatives, JointBatch, Triplet, TripletBatch,
};
pub use train::{
    train, train_with_observer, EarlyStopping, EpochRecord, StopDecision, TrainOutcome,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("user {user} has interacted with every item of domain {domain}")]
    NoNegativeAvailable { user: usize, domain: Domain },
    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: String },
    #[error("dataset is not split")]
    Unsplit,
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}
