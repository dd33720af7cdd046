//! Multilayer perceptron mapping patch features to a local time step.

mod mlp;
mod model;
mod train;

pub use mlp::{gradient_check, Mlp};
pub use model::{Model, TargetTransform, TrainMeta};
pub use train::{fold_indices, grid_search, train, write_grid_csv, write_log_csv, EpochLog, GridEntry, TrainConfig};

#[cfg(test)]
mod tests;
