//! Linear trend/seasonal forecaster, its optimiser and training loop.

mod adam;
pub mod checkpoint;
mod decomposition;
mod model;
mod train;

pub use adam::{adam_step, AdamState};
pub use decomposition::{decompose, decompose_batch, DecompositionSpec};
pub use model::{ForwardCache, LinearForecaster};
pub use train::{evaluate_metrics, train, EpochRecord, Metrics, TrainConfig, TrainOutcome};
