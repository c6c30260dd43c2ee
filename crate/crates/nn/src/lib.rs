//! A small reverse-mode network engine.
//!
//! Networks are ordered layer stacks evaluated one sample at a time; every
//! layer caches what its backward pass needs during the forward pass.
//! Besides the usual dense/convolutional layers there are layers that map a
//! raw tensor to a physical density matrix and density matrices to
//! measurement expectation values, so reconstruction problems can be trained
//! end to end.

pub mod adam;
pub mod checkpoint;
mod gemm;
pub mod layers;
pub mod losses;
pub mod network;
pub mod penalty;
pub mod quantum;
pub mod tensor;

pub use adam::{Adam, AdamConfig, LrSchedule};
pub use layers::{LayerSpec, Padding};
pub use network::{Mode, Network};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape error in layer {layer} ({kind}): {msg}")]
    Shape { layer: usize, kind: &'static str, msg: String },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Core(#[from] qst_core::QstError),
}

pub type Result<T> = std::result::Result<T, NnError>;
