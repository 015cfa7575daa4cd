//! Minimal neural engine: dense and convolutional stacks with exact
//! reverse-mode gradients.
//!
//! There is no general autodiff graph. A network is a fixed sequence of
//! layers; the forward pass can record a tape (per-layer inputs and
//! pre-activations) and the backward pass walks that tape once, producing
//! gradients for every parameter *and* for the network input. Input
//! gradients are what the gradient-following planners consume.
//!
//! Everything runs on plain row-major tensors of the crate scalar type.
//! All random initialization draws f64 from a seeded ChaCha stream, so runs
//! are reproducible and f32/f64 instantiations see identical streams.

mod adam;
mod checkpoint;
mod losses;
mod net;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{load_tensors, read_tensors, save_tensors, write_tensors};
pub use losses::{kl_std_normal, l1_loss, l2_loss};
pub use net::{
    backward, forward, forward_recorded, init_params, Activation, LayerParams, LayerSpec,
    NetParams, Network, NetworkSpec, Tape, DEFAULT_OMEGA,
};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("network spec invalid: {0}")]
    BadSpec(String),
    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),
    #[error("checkpoint io failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint format invalid: {0}")]
    BadCheckpoint(String),
}
