//! The learned capability model: per-error windowed networks feeding the
//! propagation head.

pub mod checkpoint;
pub mod mlp;
pub mod model;
pub mod train;

pub use model::{build_model, FilterSpec, ForwardOutput, Gradients, MeasNet, QpaModel, DEFAULT_HIDDEN, DEFAULT_RATE_UNIT, DEFAULT_SCALE};
pub use train::{train, train_on, EpochStats, TrainConfig, TrainHistory};
