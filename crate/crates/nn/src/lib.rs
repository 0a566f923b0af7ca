//! Minimal neural-network kernels with reverse-mode gradients.
//!
//! A [`Network`] is an ordered stack of [`LayerSpec`]s operating on a single
//! sample (no batch axis). [`Network::forward`] records a [`Tape`] that
//! [`Network::backward`] consumes to produce parameter and input gradients.
//! Everything runs in `f64`.

pub mod checkpoint;
pub mod error;
mod gemm;
pub mod layer;
pub mod loss;
pub mod network;
pub mod optim;
pub mod tensor;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint};
pub use error::{Error, Result};
pub use layer::LayerSpec;
pub use loss::{mse_loss, softmax, softmax_cross_entropy};
pub use network::{Gradients, Network, NetworkSpec, Tape};
pub use optim::{Adam, AdamHyper};
pub use tensor::Tensor;
