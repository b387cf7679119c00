//! Flow-consistency and keypoint losses.

pub mod flow;
pub mod keypoints;

pub use flow::{
    bidirectional_flow_loss, directional_flow_loss, evaluate_planned, pair_visibility, plan_flow_loss, scale_loss,
    threshold_residuals, DirectionalLoss, FlowLossEvaluation, FlowLossOptions, FlowLossPlan, FlowLossReport, PairFlows,
    EPS_FLOW,
};
pub use keypoints::{keypoint_2d_loss, KeypointLoss};
