//! LUNAR: a learnable aggregation over each node's k nearest-neighbour
//! distances, trained to separate normal rows from synthetic negatives.

mod adam;
mod mlp;
mod persist;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use mlp::{init_model, layer_dims, loss_mse, ForwardCache, Gradients, MlpModel};
pub use train::{distance_vector, train, EpochRecord, LossReduction, TrainConfig, TrainedModel};
