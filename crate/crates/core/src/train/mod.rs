//! Training regimes and their shared optimization step.

pub mod config;
pub mod objectives;
pub mod pipelines;
pub mod sequence;
pub mod trainer;

pub use config::TrainConfig;
pub use objectives::{anchor_loss, supervised_loss, AnchorTerms, SupervisedTarget, SupervisedTerms, SupervisedWeights};
pub use pipelines::{
    baseline_anchors, pretrain_baseline, refine_anchored_unsupervised, refine_with_flow, select_labeled,
    supervised_targets, train_supervised, ContextHistory,
};
pub use sequence::{moving_average, optimize_sequence, optimize_trajectory};
pub use trainer::{
    predict_batched, Batch, BatchGradient, PairItem, ParamVector, PredictionCache, StepRecord, SupervisedItem,
    TrainLog, Trainer,
};
