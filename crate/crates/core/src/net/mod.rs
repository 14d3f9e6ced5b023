//! Feature extraction and the branching dueling Q-network, with exact
//! gradients, an Adam optimizer and checkpoint files.

mod adam;
mod checkpoint;
mod config;
mod encode;
pub mod layers;
mod params;
mod qnet;

pub use adam::Adam;
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint};
pub use config::{FeatureConfig, NetConfig, StateEncoding};
pub use encode::{encode_states, NetInput};
pub use params::{ParamId, ParamStore, TensorSpec};
pub use qnet::{masked_argmax, QNetwork, QValues, Tape};

/// Floating-point types the network runs in: `f32` for training and
/// serving, `f64` for gradient checks.
pub trait Real:
    num_traits::Float
    + ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + num_traits::FromPrimitive
    + num_traits::NumAssign
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Default
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}
