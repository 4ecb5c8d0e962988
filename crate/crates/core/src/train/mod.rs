//! Optimisation: Adam, learning-rate schedule, training loop, gradient checks.

pub mod adam;
pub mod gradcheck;
pub mod schedule;
pub mod trainer;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{gradcheck, gradcheck_model, GradcheckInstance, GradcheckReport};
pub use schedule::lr_schedule;
pub use trainer::{train_loop, StepRecord, TrainConfig, TrainData, TrainOutcome, Trainer};
