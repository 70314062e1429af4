//! Dense feed-forward networks with exact reverse-mode gradients, Adam, and
//! a versioned checkpoint container.

mod adam;
pub mod checkpoint;
mod mlp;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{Checkpoint, Entry};
pub use mlp::{Activation, ForwardCache, Gradients, LayerParams, MlpParams};
