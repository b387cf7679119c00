//! Temporal context network: predicts a feature modulation from the body
//! estimates of preceding frames.
//!
//! Layer stack: a 1×1 convolution mixing the history axis into `channels`
//! rows of length 85, LeakyReLU(0.2), a linear layer to `hidden`,
//! LeakyReLU(0.2), then two independent linear heads to `feature_dim`.
//! `gamma` is one plus its head's output.

use serde::{Deserialize, Serialize};

use super::ops::{gemm, leaky_relu, leaky_relu_backward, linear_backward, linear_forward};
use super::params::{fill_normal, seeded, ParamLayout};
use super::regressor::{AffineGrad, ContextAffine};
use crate::body::PARAM_DIM;
use crate::error::{Error, Result};

const SLOPE: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContextConfig {
    /// Longest history accepted; shorter ones are left-padded.
    pub max_history: usize,
    pub channels: usize,
    pub hidden: usize,
    pub feature_dim: usize,
    pub init_std: f64,
    pub init_seed: u64,
}

impl Default for ContextConfig {
    fn default() -> Self {
        Self {
            max_history: 8,
            channels: 16,
            hidden: 128,
            feature_dim: 2048,
            init_std: 0.01,
            init_seed: 0,
        }
    }
}

/// Intermediate activations of one evaluation.
#[derive(Clone, Debug)]
pub struct ContextTrace {
    /// History after padding, `max_history × 85`.
    pub input: Vec<f64>,
    /// Mixed history after activation, `channels × 85`.
    pub mixed: Vec<f64>,
    /// `hidden` activations.
    pub hidden: Vec<f64>,
    pub shapes: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContextNet {
    config: ContextConfig,
    layout: ParamLayout,
    pub weights: Vec<f64>,
}

impl ContextNet {
    pub fn new(config: ContextConfig) -> Result<Self> {
        let mut net = Self::zeroed(config)?;
        let mut rng = seeded(net.config.init_seed);
        for spec in net.layout.entries().to_vec() {
            fill_normal(&mut net.weights, spec.range(), net.config.init_std, &mut rng);
        }
        Ok(net)
    }

    /// All weights zero: an exact identity modulation for every history.
    pub fn zeroed(config: ContextConfig) -> Result<Self> {
        if config.max_history == 0 || config.channels == 0 || config.hidden == 0 || config.feature_dim == 0 {
            return Err(Error::Config("context network dimensions must be positive".into()));
        }
        let mut layout = ParamLayout::default();
        layout.push("context.mix.weight", &[config.channels, config.max_history]);
        layout.push("context.mix.bias", &[config.channels]);
        layout.push("context.fc.weight", &[config.hidden, config.channels * PARAM_DIM]);
        layout.push("context.fc.bias", &[config.hidden]);
        layout.push("context.gamma.weight", &[config.feature_dim, config.hidden]);
        layout.push("context.gamma.bias", &[config.feature_dim]);
        layout.push("context.delta.weight", &[config.feature_dim, config.hidden]);
        layout.push("context.delta.bias", &[config.feature_dim]);
        let weights = vec![0.0; layout.total()];
        Ok(Self { config, layout, weights })
    }

    pub fn config(&self) -> &ContextConfig {
        &self.config
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    fn tensor(&self, name: &str) -> &[f64] {
        &self.weights[self.layout.get(name).expect("known tensor").range()]
    }

    fn range(&self, name: &str) -> std::ops::Range<usize> {
        self.layout.get(name).expect("known tensor").range()
    }

    /// Modulation for a history of preceding estimates, oldest first. An
    /// empty history yields the identity and no trace.
    pub fn forward(&self, history: &[[f64; PARAM_DIM]]) -> Result<(ContextAffine, Option<ContextTrace>)> {
        let n = self.config.max_history;
        if history.is_empty() {
            return Ok((ContextAffine::identity(self.config.feature_dim), None));
        }
        if history.len() > n {
            return Err(Error::Config(format!("history of {} exceeds the maximum {n}", history.len())));
        }
        let pad = n - history.len();
        let mut input = Vec::with_capacity(n * PARAM_DIM);
        for i in 0..n {
            input.extend_from_slice(&history[i.saturating_sub(pad)]);
        }
        let (c, h, f) = (self.config.channels, self.config.hidden, self.config.feature_dim);

        let mut mixed = vec![0.0; c * PARAM_DIM];
        for (o, row) in mixed.chunks_mut(PARAM_DIM).enumerate() {
            row.fill(self.tensor("context.mix.bias")[o]);
        }
        gemm(c, n, PARAM_DIM, 1.0, self.tensor("context.mix.weight"), false, &input, false, 1.0, &mut mixed);
        leaky_relu(&mut mixed, SLOPE);
        let mut hidden = linear_forward(self.tensor("context.fc.weight"), self.tensor("context.fc.bias"), &mixed, 1, c * PARAM_DIM, h);
        leaky_relu(&mut hidden, SLOPE);
        let mut gamma = linear_forward(self.tensor("context.gamma.weight"), self.tensor("context.gamma.bias"), &hidden, 1, h, f);
        gamma.iter_mut().for_each(|g| *g += 1.0);
        let delta = linear_forward(self.tensor("context.delta.weight"), self.tensor("context.delta.bias"), &hidden, 1, h, f);
        let shapes = vec![vec![history.len(), PARAM_DIM], vec![c, PARAM_DIM], vec![c * PARAM_DIM], vec![h], vec![f], vec![f]];
        Ok((
            ContextAffine { gamma, delta },
            Some(ContextTrace {
                input,
                mixed,
                hidden,
                shapes,
            }),
        ))
    }

    /// Accumulates weight gradients for one evaluation.
    pub fn backward(&self, trace: &ContextTrace, grad: &AffineGrad, grads: &mut [f64]) {
        assert_eq!(grads.len(), self.weights.len());
        let (n, c, h, f) = (self.config.max_history, self.config.channels, self.config.hidden, self.config.feature_dim);
        let mut g_hidden = {
            let (w, b) = pair(grads, self.range("context.gamma.weight"), self.range("context.gamma.bias"));
            linear_backward(self.tensor("context.gamma.weight"), &trace.hidden, &grad.gamma, 1, h, f, w, b)
        };
        let (w, b) = pair(grads, self.range("context.delta.weight"), self.range("context.delta.bias"));
        let from_delta = linear_backward(self.tensor("context.delta.weight"), &trace.hidden, &grad.delta, 1, h, f, w, b);
        g_hidden.iter_mut().zip(from_delta).for_each(|(a, b)| *a += b);
        leaky_relu_backward(&trace.hidden, &mut g_hidden, SLOPE);
        let (w, b) = pair(grads, self.range("context.fc.weight"), self.range("context.fc.bias"));
        let mut g_mixed = linear_backward(self.tensor("context.fc.weight"), &trace.mixed, &g_hidden, 1, c * PARAM_DIM, h, w, b);
        leaky_relu_backward(&trace.mixed, &mut g_mixed, SLOPE);
        let (w, b) = pair(grads, self.range("context.mix.weight"), self.range("context.mix.bias"));
        gemm(c, PARAM_DIM, n, 1.0, &g_mixed, false, &trace.input, true, 1.0, w);
        for (o, row) in g_mixed.chunks(PARAM_DIM).enumerate() {
            b[o] += row.iter().sum::<f64>();
        }
    }
}

fn pair(buf: &mut [f64], weight: std::ops::Range<usize>, bias: std::ops::Range<usize>) -> (&mut [f64], &mut [f64]) {
    let (w, b) = buf[weight.start..bias.end].split_at_mut(weight.len());
    (w, b)
}
