//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records every operation applied to its [`Var`] handles. Calling
//! [`Tape::backward`] on a `1×1` node walks the record in reverse and returns
//! the [`Gradients`] of every node that depends on a leaf or a parameter.
//! Parameters live in a [`ParameterStore`] that outlives individual tapes; the
//! usual step is
//!
//! 1. bind parameters with [`Tape::param`] and build the loss,
//! 2. [`Tape::backward`] and [`Gradients::accumulate_into`] the store,
//! 3. [`AdamState::step`] to apply and clear the accumulated gradients.

mod adam;
mod check;
mod checkpoint;
mod init;
mod matrix;
mod params;
mod sparse;
mod tape;

pub use adam::AdamState;
pub use check::{grad_check, GradCheckConfig, GradCheckReport};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use init::{xavier_init, xavier_normal};
pub use matrix::Matrix;
pub use params::{l2_penalty, ParamId, Parameter, ParameterStore};
pub use sparse::SparseMatrix;
pub use tape::{Gradients, Tape, Var};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("matrix dimensions must be at least 1, got {rows}x{cols}")]
    ZeroDimension { rows: usize, cols: usize },
    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),
    #[error("non-finite value in parameter `{0}`")]
    NonFiniteParameter(String),
    #[error("zero-norm vector at row {0}")]
    ZeroVector(usize),
    #[error("backward root must be 1x1, got {0:?}")]
    NotScalar((usize, usize)),
    #[error("index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("duplicate parameter name `{0}`")]
    DuplicateParameter(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("invalid optimizer setting: {0}")]
    InvalidOptimizer(String),
    #[error("malformed checkpoint: {0}")]
    MalformedCheckpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
