//! Edge-feature graph network over anatomy graphs.

pub mod loss;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod params;
pub mod registry;

pub use loss::{create_loss, loss_registry, Loss};
pub use metrics::{auc, eval_targets, mean_auc, per_class_auc, topk_accuracy, NotMentionedPolicy};
pub use model::{backprop, backward, forward, OutputSeed, Prediction, Sensitivity};
pub use optim::{create_optimizer, optimizer_registry, OptimConfig, Optimizer};
pub use params::{Aggregation, HeadActivation, ModelConfig, ModelParams};
pub mod checkpoint;
pub mod train;

pub use train::{evaluate, predict, train, train_from, EpochMetrics, EvalReport, TrainConfig, TrainOutcome};
