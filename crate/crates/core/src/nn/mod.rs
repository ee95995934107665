//! Dense feed-forward networks with exact reverse-mode gradients and Adam.

mod adam;
mod backward;
mod model;

pub use adam::{adam_step, AdamState};
pub use backward::{backward, batch_loss, finite_diff_grad, Batch, GradientSet, LayerGradient};
pub use model::{Dense, FeedForwardModel, DEFAULT_HEAD_BIAS};
