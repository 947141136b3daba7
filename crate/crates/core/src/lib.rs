//! Graph neural networks over ragged mini-batches of variable-size graphs.
//!
//! Graph batches are stored as ragged tensors (a flat row buffer plus row
//! offsets) and converted to the disjoint single-graph layout for message
//! passing, or to a zero-padded layout with a mask. Layers are recorded on a
//! reverse-mode [`autodiff::Tape`] so every model can be trained and
//! gradient-checked.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix it to `f64`, which is what training, checkpoints and
//! the command-line tool use.

pub mod autodiff;
pub mod data;
mod error;
pub mod layers;
pub mod models;
pub mod ragged;
mod scalar;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Ragged = ragged::Ragged<f64>;
pub type GraphBatch = ragged::GraphBatch<f64>;
pub type DisjointBatch = ragged::DisjointBatch<f64>;
pub type PaddedBatch = ragged::PaddedBatch<f64>;
pub type AdjacencyCsr = ragged::AdjacencyCsr<f64>;
pub type Tape = autodiff::Tape<f64>;
pub type ParamStore = autodiff::ParamStore<f64>;
pub type Model = models::Model<f64>;

