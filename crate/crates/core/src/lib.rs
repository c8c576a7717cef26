//! Dual-domain recommendation with GNN-enhanced supervised disentanglement.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision used by the command-line tools.

pub mod corpus;
pub mod decoder;
pub mod diff;
pub mod encoder;
pub mod eval;
pub mod graph;
pub mod model;
pub mod propagation;
mod scalar;
pub mod synth;

pub use scalar::Scalar;

pub type Matrix = diff::Matrix<f64>;
pub type Tape = diff::Tape<f64>;
pub type ParameterStore = diff::ParameterStore<f64>;
pub type Model = model::Model<f64>;
pub type TrainOutcome = model::TrainOutcome<f64>;

pub type Matrix32 = diff::Matrix<f32>;
pub type Tape32 = diff::Tape<f32>;
pub type ParameterStore32 = diff::ParameterStore<f32>;
pub type Model32 = model::Model<f32>;
pub type TrainOutcome32 = model::TrainOutcome<f32>;
