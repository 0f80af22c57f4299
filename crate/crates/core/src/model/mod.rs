//! The h-potential approximator: a fully connected ReLU network with a
//! scalar output, its reverse-mode gradients, and Adam.

mod adam;
mod checkpoint;
mod mlp;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use mlp::{init_mlp, loss_and_grad, Dense, Gradients, MlpModel, PairRegularizer};
