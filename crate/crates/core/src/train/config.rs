use serde::{Deserialize, Serialize};

use super::objectives::SupervisedWeights;
use crate::error::{Error, Result};
use crate::supervision::FlowLossOptions;

/// Loss weights, batch composition and optimizer settings shared by every
/// training regime.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lambda_sup: f64,
    pub lambda_of: f64,
    /// Reserved for a color-consistency term; not used by any pipeline.
    pub lambda_tp: f64,
    pub lambda_2d: f64,
    /// Weight of the unsquared pose anchor.
    pub lambda_pose: f64,
    /// Weight of the unsquared shape anchor.
    pub lambda_shape: f64,
    /// Weight of the pull toward the moving average in sequence optimization.
    pub lambda_smooth: f64,
    pub smoothing_window: usize,
    pub label_fraction: f64,
    /// Seeds the labeled subset, separately from `seed`, so that a baseline
    /// and its refinements see the same labels.
    pub label_seed: u64,
    pub labeled_batch: usize,
    pub pair_batch: usize,
    pub color_noise_std: f64,
    pub learning_rate: f64,
    /// Learning rate of the context network; `learning_rate` when unset.
    pub context_learning_rate: Option<f64>,
    pub steps: usize,
    pub seed: u64,
    /// Number of preceding frames fed to the context network (0 disables it).
    pub context_length: usize,
    /// Train only the context network, keeping the regressor fixed.
    pub freeze_regressor: bool,
    /// Update the convolutional encoder (otherwise only the head).
    pub train_encoder: bool,
    pub flow_threshold: bool,
    pub flow_scale: bool,
    pub eps_flow: f64,
    pub supervised: SupervisedWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda_sup: 1.0,
            lambda_of: 0.01,
            lambda_tp: 10.0,
            lambda_2d: 0.0,
            lambda_pose: 1.0,
            lambda_shape: 1.0,
            lambda_smooth: 0.0,
            smoothing_window: 30,
            label_fraction: 1.0,
            label_seed: 0,
            labeled_batch: 16,
            pair_batch: 16,
            color_noise_std: 0.03,
            learning_rate: 1e-4,
            context_learning_rate: None,
            steps: 1000,
            seed: 0,
            context_length: 0,
            freeze_regressor: false,
            train_encoder: true,
            flow_threshold: true,
            flow_scale: true,
            eps_flow: crate::supervision::EPS_FLOW,
            supervised: SupervisedWeights::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let weights = [
            ("lambda_sup", self.lambda_sup),
            ("lambda_of", self.lambda_of),
            ("lambda_tp", self.lambda_tp),
            ("lambda_2d", self.lambda_2d),
            ("lambda_pose", self.lambda_pose),
            ("lambda_shape", self.lambda_shape),
            ("lambda_smooth", self.lambda_smooth),
            ("color_noise_std", self.color_noise_std),
        ];
        if let Some((name, v)) = weights.iter().find(|(_, v)| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("{name} must be a non-negative number, got {v}")));
        }
        if !(self.label_fraction > 0.0 && self.label_fraction <= 1.0) {
            return Err(Error::Config(format!("label_fraction {} outside (0, 1]", self.label_fraction)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !self.context_learning_rate.is_none_or(|lr| lr > 0.0 && lr.is_finite()) {
            return Err(Error::Config("context_learning_rate must be positive".into()));
        }
        if self.smoothing_window == 0 {
            return Err(Error::Config("smoothing_window must be positive".into()));
        }
        if !(self.eps_flow > 0.0) {
            return Err(Error::Config("eps_flow must be positive".into()));
        }
        Ok(())
    }

    pub fn flow_options(&self) -> FlowLossOptions {
        FlowLossOptions {
            threshold: self.flow_threshold,
            scale: self.flow_scale,
            eps_flow: self.eps_flow,
        }
    }
}
