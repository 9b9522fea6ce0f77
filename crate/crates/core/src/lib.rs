//! Hyperparameter grid search for small CNNs with convolutional-layer reuse.
//!
//! A larger network is trained with a prefix of convolutional stages copied
//! from an already-trained smaller one and frozen: those stages still run in
//! inference but are skipped by backpropagation. The crate provides the
//! kernels, model, data loader, search spaces, weight archive, trainer and a
//! dependency-aware orchestrator needed to measure what that saves.

pub mod data;
pub mod error;
pub mod model;
pub mod ops;
pub mod orchestrator;
pub mod reuse;
pub mod search;
pub mod seed;
pub mod tensor;
pub mod trainer;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use model::{ConfigId, NetworkConfig};
pub use ops::OpCounter;
pub use tensor::Tensor;
