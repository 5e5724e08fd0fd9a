//! Two-stage training: representation learning on the long-tailed data,
//! then classifier re-training (cRT) on re-balanced batches with the
//! backbone frozen.

mod config;
mod eval;
mod experiment;
mod train;

pub use config::{GroupThresholds, Method, TrainConfig};
pub use eval::{evaluate, evaluate_predictions, predict, EvalReport, Group, GroupAccuracy};
pub use experiment::{embeddings_csv, run_arm, run_experiment, ArmOutcome, ExperimentConfig, ExperimentOutcome};
pub use train::{train_stage1, train_stage2_crt, LossTrace, Stage1Output, Stage2Output, TraceRow};
