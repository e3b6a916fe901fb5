//! Selective node propagation for transductive node classification.
//!
//! Each layer scores every node from its neighbourhood, lets only nodes
//! above a threshold propagate their transformed features, and a model sums
//! the outputs of several independent one-hop layers.

pub mod bench;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod kernels;
pub mod layers;
pub mod model;
pub mod rng;

pub use error::{Error, Result};
pub use graph::{Graph, SplitMasks};
pub use kernels::DenseMatrix;
pub use model::{init_model, train, Model, ModelConfig};
