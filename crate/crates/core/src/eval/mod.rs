//! Accuracy and smoothness metrics and the flow-quality audit.

pub mod audit;
pub mod metrics;
pub mod normalization;
pub mod report;

pub use audit::{flow_quality_audit, visible_keypoints, FlowQualityReport, FlowSource};
pub use metrics::{acceleration_error, mpjpe, pmpjpe, procrustes, Similarity};
pub use normalization::{coefficient_of_variation, flow_loss_samples, FlowLossSample};
pub use report::{evaluate_model, evaluate_sequences, ground_truth, predict_dataset, joints_mm, MetricReport, SequenceMetrics, MM_PER_METER};
