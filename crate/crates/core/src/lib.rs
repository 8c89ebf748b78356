//! Genetic programming over word-embedding vectors for next-word prediction.
//!
//! Words are embedded as unit vectors. A GP tree combines the vectors of the
//! first `k` words of a sentence through component-wise operators whose results
//! are re-normalized to unit length, and the output vector is decoded back to
//! the vocabulary word with the highest cosine similarity.
//!
//! The numeric core is generic over the scalar type (see [`Scalar`]); the
//! aliases at the crate root fix it to `f64`, which is what the experiment
//! pipeline uses.

pub mod baselines;
pub mod dataset;
pub mod embedding;
mod error;
pub mod evolution;
pub mod gp;
mod scalar;
pub mod sgns;
pub mod variation;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use baselines::{PredictorKind, PredictorScore};
pub use dataset::{FitnessCase, Headline};
pub use embedding::Vocabulary;
pub use evolution::{EvolutionParams, RunResult};
pub use gp::{BinaryOp, GpTree, Node, UnaryOp};
pub use sgns::TrainerParams;
pub use variation::CrossoverKind;

/// Embedding table with `f64` components.
pub type EmbeddingTable = embedding::EmbeddingTable<f64>;
/// Embedding table with `f32` components.
pub type EmbeddingTable32 = embedding::EmbeddingTable<f32>;
/// Reusable tree evaluator over `f64` vectors.
pub type Evaluator = gp::Evaluator<f64>;
/// Population member with an `f64` fitness.
pub type Individual = evolution::Individual<f64>;
