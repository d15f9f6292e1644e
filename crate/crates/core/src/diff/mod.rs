//! Minimal reverse-mode differentiation for the fixed architectures used in
//! this crate: fully connected layers, point max-pooling, Chamfer loss and
//! Adam with a multistep schedule.

mod adam;
mod chamfer;
mod checkpoint;
mod gradcheck;
mod mlp;
mod pool;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use chamfer::chamfer_loss_grad;
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
pub use gradcheck::{check_gradients, relative_error, GradCheckReport};
pub use mlp::{Activation, Gradients, LayerShape, Linear, Mlp, Tape};
pub use pool::{maxpool_backward, maxpool_points, maxpool_segments, maxpool_segments_backward};
