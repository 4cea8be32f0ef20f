//! Full model, training loop, evaluation and checkpoints.

mod checkpoint;
mod config;
mod model;
mod trainer;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, FORMAT_VERSION, MAGIC};
pub use config::{ModelConfig, TrainConfig};
pub use model::{ForwardOutput, LossAndGrad, Model, ModelCache, INFEASIBLE_LOSS};
pub use trainer::{evaluate, predict, train_step, Evaluation, LogLine, StepStats, TrainSummary, Trainer};
