//! One optimization step over a batch mixing labeled frames and unlabeled
//! frame pairs.

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::objectives::{anchor_loss, supervised_loss, SupervisedTarget};
use crate::body::{BodyGradients, BodyParams, ImageSize, MeshTemplate, ProjectedBody, PARAM_DIM};
use crate::data::{Dataset, Keypoints2d};
use crate::error::{Error, Result};
use crate::nn::{params_grad_to_raw, Adam, ContextAffine, ContextNet, ContextTrace, Regressor};
use crate::parallel::map_indexed;
use crate::supervision::{bidirectional_flow_loss, keypoint_2d_loss, PairFlows};

/// Body parameters flattened as in [`BodyParams::to_vec`].
pub type ParamVector = [f64; PARAM_DIM];

pub(crate) fn as_vector(p: &BodyParams) -> ParamVector {
    p.to_vec().try_into().expect("85 entries")
}

/// Per-frame estimates of a fixed network over a dataset. Serves as the
/// history fed to the context network and as anchors.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionCache {
    pub per_sequence: Vec<Vec<ParamVector>>,
}

impl PredictionCache {
    pub fn build(regressor: &Regressor, dataset: &Dataset, workers: usize) -> Result<Self> {
        let per_sequence = map_indexed(dataset.sequences.len(), workers, |s| {
            let images: Vec<Vec<f32>> = dataset.sequences[s].frames.iter().map(|f| f.to_unit()).collect();
            let refs: Vec<&[f32]> = images.iter().map(|v| v.as_slice()).collect();
            predict_batched(regressor, None, &refs, &vec![&[][..]; refs.len()])
                .map(|ps| ps.iter().map(as_vector).collect::<Vec<_>>())
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        Ok(Self { per_sequence })
    }

    /// Up to `len` estimates preceding `frame`, oldest first.
    pub fn history(&self, sequence: usize, frame: usize, len: usize) -> &[ParamVector] {
        &self.per_sequence[sequence][frame.saturating_sub(len)..frame]
    }

    pub fn get(&self, sequence: usize, frame: usize) -> &ParamVector {
        &self.per_sequence[sequence][frame]
    }
}

const PREDICT_CHUNK: usize = 32;

/// Predictions for many images, evaluated in fixed-size chunks.
pub fn predict_batched(
    regressor: &Regressor,
    context: Option<&ContextNet>,
    images: &[&[f32]],
    histories: &[&[ParamVector]],
) -> Result<Vec<BodyParams>> {
    let mut out = Vec::with_capacity(images.len());
    for (chunk, hist) in images.chunks(PREDICT_CHUNK).zip(histories.chunks(PREDICT_CHUNK)) {
        let contexts = match context {
            Some(net) => Some(
                hist.iter()
                    .map(|h| net.forward(h).map(|(a, _)| a))
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => None,
        };
        out.extend(regressor.forward(chunk, contexts.as_deref())?.params()?);
    }
    Ok(out)
}

/// A labeled frame prepared for training.
pub struct SupervisedItem<'a> {
    pub image: Vec<f32>,
    pub target: &'a SupervisedTarget,
    pub history: &'a [ParamVector],
    pub id: (usize, usize),
}

/// An unlabeled frame pair prepared for training.
pub struct PairItem<'a> {
    pub images: [Vec<f32>; 2],
    pub flows: PairFlows<'a>,
    pub histories: [&'a [ParamVector]; 2],
    pub anchors: Option<[&'a ParamVector; 2]>,
    pub keypoints: Option<[&'a Keypoints2d; 2]>,
    pub id: (usize, usize),
}

#[derive(Default)]
pub struct Batch<'a> {
    pub supervised: Vec<SupervisedItem<'a>>,
    pub pairs: Vec<PairItem<'a>>,
}

/// Loss decomposition of one step. Every part is already multiplied by its
/// weight, so `total` is their sum.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub total: f64,
    pub supervised: f64,
    pub flow: f64,
    pub keypoints: f64,
    pub anchor: f64,
    pub smoothing: f64,
    /// Mean flow loss before division by the flow magnitude, unweighted.
    pub flow_unscaled: f64,
    pub skipped_pairs: usize,
}

impl StepRecord {
    pub fn parts_sum(&self) -> f64 {
        self.supervised + self.flow + self.keypoints + self.anchor + self.smoothing
    }

    pub const CSV_HEADER: &'static str = "step,total,supervised,flow,keypoints,anchor,smoothing,flow_unscaled,skipped_pairs";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.step,
            self.total,
            self.supervised,
            self.flow,
            self.keypoints,
            self.anchor,
            self.smoothing,
            self.flow_unscaled,
            self.skipped_pairs
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<StepRecord>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(StepRecord::CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }

    pub fn skipped_pairs(&self) -> usize {
        self.records.iter().map(|r| r.skipped_pairs).sum()
    }
}

/// Gradient of one batch with its loss decomposition.
#[derive(Clone, Debug)]
pub struct BatchGradient {
    pub regressor: Vec<f64>,
    pub context: Option<Vec<f64>>,
    pub record: StepRecord,
}

pub struct Trainer<'t> {
    template: &'t MeshTemplate,
    size: ImageSize,
    pub regressor: Regressor,
    pub context: Option<ContextNet>,
    regressor_opt: Adam,
    context_opt: Option<Adam>,
    pub config: TrainConfig,
    steps: usize,
}

impl<'t> Trainer<'t> {
    pub fn new(template: &'t MeshTemplate, regressor: Regressor, context: Option<ContextNet>, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if let Some(c) = &context {
            if c.config().feature_dim != regressor.feature_dim() {
                return Err(Error::Config(format!(
                    "context feature_dim {} does not match regressor feature_dim {}",
                    c.config().feature_dim,
                    regressor.feature_dim()
                )));
            }
        }
        let regressor_opt = Adam::new(regressor.weights.len(), config.learning_rate);
        let context_lr = config.context_learning_rate.unwrap_or(config.learning_rate);
        let context_opt = context.as_ref().map(|c| Adam::new(c.weights.len(), context_lr));
        Ok(Self {
            template,
            size: regressor.config().image_size(),
            regressor,
            context,
            regressor_opt,
            context_opt,
            config,
            steps: 0,
        })
    }

    pub fn gradient(&self, batch: &Batch<'_>) -> Result<BatchGradient> {
        let cfg = &self.config;
        let mut images: Vec<&[f32]> = batch.supervised.iter().map(|s| s.image.as_slice()).collect();
        let mut histories: Vec<&[ParamVector]> = batch.supervised.iter().map(|s| s.history).collect();
        for p in &batch.pairs {
            images.extend(p.images.iter().map(|i| i.as_slice()));
            histories.extend(p.histories);
        }
        let mut traces: Vec<Option<ContextTrace>> = Vec::new();
        let contexts: Option<Vec<ContextAffine>> = match &self.context {
            Some(net) => {
                let mut affines = Vec::with_capacity(images.len());
                for h in &histories {
                    let (a, t) = net.forward(h)?;
                    affines.push(a);
                    traces.push(t);
                }
                Some(affines)
            }
            None => None,
        };
        let pass = self.regressor.forward(&images, contexts.as_deref())?;
        let ids: Vec<(usize, usize)> = batch
            .supervised
            .iter()
            .map(|s| s.id)
            .chain(batch.pairs.iter().map(|p| p.id))
            .collect();
        let preds = pass.params().map_err(|e| {
            Error::Degenerate(format!("non-finite prediction ({e}) in batch {ids:?}"))
        })?;

        let mut record = StepRecord::default();
        let mut grad_params = vec![[0.0; PARAM_DIM]; images.len()];
        let n_sup = batch.supervised.len();
        for (i, item) in batch.supervised.iter().enumerate() {
            let (terms, g) = supervised_loss(self.template, &preds[i], item.target, self.size, &cfg.supervised);
            let w = cfg.lambda_sup / n_sup as f64;
            record.supervised += w * terms.weighted(&cfg.supervised);
            add_scaled(&mut grad_params[i], &g, w);
        }

        let opts = cfg.flow_options();
        let evals: Vec<_> = batch
            .pairs
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let (a, b) = (n_sup + 2 * k, n_sup + 2 * k + 1);
                bidirectional_flow_loss(self.template, &preds[a], &preds[b], p.flows, opts)
            })
            .collect();
        let valid = evals.iter().filter(|e| !e.report.empty_mask).count();
        record.skipped_pairs = evals.len() - valid;
        for (k, (item, eval)) in batch.pairs.iter().zip(&evals).enumerate() {
            if eval.report.empty_mask {
                continue;
            }
            let per_pair = 1.0 / valid as f64;
            let idx = [n_sup + 2 * k, n_sup + 2 * k + 1];
            record.flow += cfg.lambda_of * per_pair * eval.report.loss;
            record.flow_unscaled += per_pair * eval.report.unscaled_loss;
            add_scaled(&mut grad_params[idx[0]], &eval.grad_1, cfg.lambda_of * per_pair);
            add_scaled(&mut grad_params[idx[1]], &eval.grad_2, cfg.lambda_of * per_pair);
            for side in 0..2 {
                let pred = &preds[idx[side]];
                if let Some(anchors) = item.anchors {
                    let (terms, g) = anchor_loss(&as_vector(pred), anchors[side], cfg.lambda_pose, cfg.lambda_shape);
                    record.anchor += 0.5 * per_pair * (cfg.lambda_pose * terms.pose + cfg.lambda_shape * terms.shape);
                    add_scaled(&mut grad_params[idx[side]], &g, 0.5 * per_pair);
                }
                if let (Some(kp), true) = (item.keypoints, cfg.lambda_2d > 0.0) {
                    let body = ProjectedBody::new(self.template, pred, self.size);
                    let l = keypoint_2d_loss(&body.joints_2d, &kp[side].points, &kp[side].confidence);
                    let w = 0.5 * per_pair * cfg.lambda_2d;
                    record.keypoints += w * l.loss;
                    let g = body.backward(
                        self.template,
                        BodyGradients {
                            joints_2d: &l.grad,
                            ..Default::default()
                        },
                    );
                    add_scaled(&mut grad_params[idx[side]], &g, w);
                }
            }
        }
        record.total = record.parts_sum();
        if !record.total.is_finite() {
            return Err(Error::Degenerate(format!("non-finite loss {} in batch {ids:?}", record.total)));
        }

        let grad_raw: Vec<ParamVector> = grad_params
            .iter()
            .zip(&pass.raw)
            .map(|(g, raw)| params_grad_to_raw(g, raw))
            .collect();
        let mut regressor_grad = vec![0.0; self.regressor.weights.len()];
        let train_encoder = cfg.train_encoder && !cfg.freeze_regressor;
        let affine = self.regressor.backward(&pass, &grad_raw, &mut regressor_grad, train_encoder);
        if !cfg.train_encoder {
            for spec in self.regressor.layout().entries() {
                if spec.name.starts_with("encoder.") {
                    regressor_grad[spec.range()].fill(0.0);
                }
            }
        }
        let context = match (&self.context, affine) {
            (Some(net), Some(affine)) => {
                let mut g = vec![0.0; net.weights.len()];
                for (trace, a) in traces.iter().zip(&affine) {
                    if let Some(t) = trace {
                        net.backward(t, a, &mut g);
                    }
                }
                Some(g)
            }
            _ => None,
        };
        Ok(BatchGradient {
            regressor: regressor_grad,
            context,
            record,
        })
    }

    pub fn apply(&mut self, grad: &BatchGradient) {
        if !self.config.freeze_regressor {
            self.regressor_opt.step(&mut self.regressor.weights, &grad.regressor);
        }
        if let (Some(net), Some(opt), Some(g)) = (&mut self.context, &mut self.context_opt, &grad.context) {
            opt.step(&mut net.weights, g);
        }
        self.steps += 1;
    }

    /// Gradient step on one batch; returns its loss decomposition.
    pub fn step(&mut self, batch: &Batch<'_>) -> Result<StepRecord> {
        let grad = self.gradient(batch)?;
        self.apply(&grad);
        let mut record = grad.record;
        record.step = self.steps;
        Ok(record)
    }
}

fn add_scaled(dst: &mut ParamVector, src: &ParamVector, w: f64) {
    dst.iter_mut().zip(src).for_each(|(a, b)| *a += w * b);
}
