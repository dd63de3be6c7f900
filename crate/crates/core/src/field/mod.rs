//! The neural field: hash encoding, MLP heads, contrastive training and
//! checkpoints.

pub mod checkpoint;
pub mod heads;
pub mod loss;
pub mod model;
pub mod optim;
pub mod train;

pub use checkpoint::{
    checkpoint_bytes, checkpoint_digest, load_checkpoint, parse_checkpoint, save_checkpoint,
};
pub use heads::{Activation, FieldHeads};
pub use loss::{contrastive_loss, contrastive_loss_grad, LossConfig};
pub use model::{branch_weights, Gradients, LopField, LossParts};
pub use optim::{AdamParams, AdamState};
pub use train::{fine_tune, train, TrainConfig, TrainReport, Trainer, WeightedSampler};
