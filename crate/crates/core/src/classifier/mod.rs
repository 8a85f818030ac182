//! A small fully connected image classifier and its evaluation.

mod checkpoint;
mod gradcheck;
mod metrics;
mod mlp;
mod train;

pub use checkpoint::{sidecar_path, CheckpointMeta, CHECKPOINT_FORMAT};
pub use gradcheck::{gradient_check, GradCheck};
pub use metrics::{evaluate, predict, predicted_joint, Metrics};
pub use mlp::{Gradients, Group, MlpModel, STANDARD_DIMS};
pub use train::{normalize, train, TrainConfig, TrainReport};
