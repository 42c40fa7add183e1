//! Learned refinement of the analytical estimates: a 128×64×32 MLP over the
//! per-configuration axis-angles and residuals.

mod features;
mod mlp;
mod train;

pub use features::{feature_vector, FeatureGroup, FeatureLayout, Standardizer, SLOTS_PER_GROUP};
pub use mlp::{mse_loss, param_count, Mlp, HIDDEN, OUTPUT_DIM};
pub use train::{
    split_dataset, train, LbtoModel, Sample, SwaAverager, TrainConfig, TrainHistory, MODEL_FORMAT_VERSION,
};
