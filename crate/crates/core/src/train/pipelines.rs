//! Training regimes: supervised pre-training, flow-guided refinement and
//! anchored unsupervised refinement.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use super::objectives::SupervisedTarget;
use super::trainer::{as_vector, predict_batched, Batch, PairItem, ParamVector, PredictionCache, SupervisedItem, TrainLog, Trainer};
use crate::body::MeshTemplate;
use crate::data::{apply_color_noise, Dataset, UnlabeledPair};
use crate::error::{Error, Result};
use crate::nn::{ContextNet, Regressor};
use crate::supervision::PairFlows;

const PAIR_STREAM: u64 = 0x7061_6972;
const SUBSET_STREAM: u64 = 0x7375_6273;

/// Deterministic subset of the labeled frames: `ceil(fraction · n)` of them.
pub fn select_labeled(dataset: &Dataset, fraction: f64, seed: u64) -> Vec<(usize, usize)> {
    let mut all = dataset.labeled_indices();
    all.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ SUBSET_STREAM));
    let keep = ((fraction * all.len() as f64).ceil() as usize).min(all.len());
    all.truncate(keep);
    all.sort_unstable();
    all
}

/// Reads the labels of `indices` once and caches the derived targets.
pub fn supervised_targets(template: &MeshTemplate, dataset: &Dataset, indices: &[(usize, usize)]) -> Result<Vec<SupervisedTarget>> {
    indices
        .iter()
        .map(|&(s, f)| {
            dataset
                .labels
                .get(s, f)
                .map(|p| SupervisedTarget::new(template, p, dataset.size))
                .ok_or_else(|| Error::Data(format!("frame {f} of sequence {s} has no label")))
        })
        .collect()
}

struct LabeledPool<'a> {
    dataset: &'a Dataset,
    indices: Vec<(usize, usize)>,
    targets: Vec<SupervisedTarget>,
    history: Option<&'a PredictionCache>,
    rng: ChaCha8Rng,
}

impl<'a> LabeledPool<'a> {
    fn new(template: &MeshTemplate, dataset: &'a Dataset, config: &TrainConfig, history: Option<&'a PredictionCache>) -> Result<Self> {
        let indices = select_labeled(dataset, config.label_fraction, config.label_seed);
        if indices.len() < config.labeled_batch.max(1) {
            return Err(Error::Data(format!(
                "{} labeled frames selected, fewer than one batch of {}",
                indices.len(),
                config.labeled_batch
            )));
        }
        let targets = supervised_targets(template, dataset, &indices)?;
        Ok(Self {
            dataset,
            indices,
            targets,
            history,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        })
    }

    fn sample(&mut self, count: usize, context_length: usize) -> Vec<SupervisedItem<'_>> {
        let picks: Vec<usize> = (0..count).map(|_| self.rng.random_range(0..self.indices.len())).collect();
        picks
            .into_iter()
            .map(|k| {
                let (s, f) = self.indices[k];
                SupervisedItem {
                    image: self.dataset.frame(s, f).to_unit(),
                    target: &self.targets[k],
                    history: self.history.map_or(&[][..], |h| h.history(s, f, context_length)),
                    id: (s, f),
                }
            })
            .collect()
    }
}

struct PairPool<'a> {
    pairs: &'a [UnlabeledPair<'a>],
    history: Option<&'a PredictionCache>,
    anchors: Option<Vec<[ParamVector; 2]>>,
    rng: ChaCha8Rng,
}

impl<'a> PairPool<'a> {
    fn new(pairs: &'a [UnlabeledPair<'a>], config: &TrainConfig, history: Option<&'a PredictionCache>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Data("no unlabeled pairs".into()));
        }
        Ok(Self {
            pairs,
            history,
            anchors: None,
            rng: ChaCha8Rng::seed_from_u64(config.seed ^ PAIR_STREAM),
        })
    }

    fn sample(&mut self, count: usize, config: &TrainConfig) -> Vec<PairItem<'_>> {
        let picks: Vec<(usize, u64, u64)> = (0..count)
            .map(|_| (self.rng.random_range(0..self.pairs.len()), self.rng.random(), self.rng.random()))
            .collect();
        picks
            .into_iter()
            .map(|(k, seed_1, seed_2)| {
                let p = &self.pairs[k];
                let noise = config.color_noise_std;
                let hist = |frame| {
                    self.history
                        .map_or(&[][..], |h| h.history(p.sequence, frame, config.context_length))
                };
                PairItem {
                    images: [
                        apply_color_noise(&p.image_1.to_unit(), noise, seed_1),
                        apply_color_noise(&p.image_2.to_unit(), noise, seed_2),
                    ],
                    flows: PairFlows {
                        forward: p.flow_1to2,
                        backward: p.flow_2to1,
                    },
                    histories: [hist(p.frame), hist(p.frame + p.delta_t)],
                    anchors: self.anchors.as_ref().map(|a| [&a[k][0], &a[k][1]]),
                    keypoints: p.keypoints,
                    id: (p.sequence, p.frame),
                }
            })
            .collect()
    }
}

/// Supervised training on labeled frames starting from `regressor`.
pub fn train_supervised(template: &MeshTemplate, regressor: Regressor, dataset: &Dataset, config: &TrainConfig) -> Result<(Regressor, TrainLog)> {
    let mut pool = LabeledPool::new(template, dataset, config, None)?;
    let mut trainer = Trainer::new(template, regressor, None, config.clone())?;
    let mut log = TrainLog::default();
    for _ in 0..config.steps {
        let batch = Batch {
            supervised: pool.sample(config.labeled_batch, 0),
            pairs: Vec::new(),
        };
        log.records.push(trainer.step(&batch)?);
    }
    Ok((trainer.regressor, log))
}

/// Supervised pre-training of a freshly initialized regressor on a
/// `label_fraction` subset of the labeled frames.
pub fn pretrain_baseline(
    template: &MeshTemplate,
    dataset: &Dataset,
    regressor_config: crate::nn::RegressorConfig,
    config: &TrainConfig,
) -> Result<(Regressor, TrainLog)> {
    let regressor = Regressor::new(regressor_config)?;
    if regressor.config().image_size() != dataset.size {
        return Err(Error::Config("regressor image size differs from the dataset".into()));
    }
    train_supervised(template, regressor, dataset, config)
}

/// Frozen-baseline estimates that feed the context network, one cache per
/// data source.
#[derive(Clone, Copy)]
pub struct ContextHistory<'a> {
    pub labeled: &'a PredictionCache,
    pub pairs: &'a PredictionCache,
}

/// Refinement mixing supervised frames with flow-supervised pairs, with an
/// optional temporal context network.
pub fn refine_with_flow<'a>(
    template: &MeshTemplate,
    baseline: &Regressor,
    context: Option<ContextNet>,
    labeled: &'a Dataset,
    pairs: &'a [UnlabeledPair<'a>],
    history: Option<ContextHistory<'a>>,
    config: &TrainConfig,
) -> Result<(Regressor, Option<ContextNet>, TrainLog)> {
    if config.context_length > 0 && (context.is_none() || history.is_none()) {
        return Err(Error::Config("context_length > 0 needs a context network and history".into()));
    }
    let use_context = config.context_length > 0;
    let context = if use_context { context } else { None };
    let mut labeled_pool = LabeledPool::new(template, labeled, config, history.filter(|_| use_context).map(|h| h.labeled))?;
    let mut pair_pool = PairPool::new(pairs, config, history.filter(|_| use_context).map(|h| h.pairs))?;
    let uses_pairs = config.lambda_of > 0.0 || config.lambda_2d > 0.0;
    let uses_labels = config.lambda_sup > 0.0;
    let mut trainer = Trainer::new(template, baseline.clone(), context, config.clone())?;
    let mut log = TrainLog::default();
    for _ in 0..config.steps {
        let supervised = if uses_labels {
            labeled_pool.sample(config.labeled_batch, config.context_length)
        } else {
            Vec::new()
        };
        let pairs = if uses_pairs {
            pair_pool.sample(config.pair_batch, config)
        } else {
            Vec::new()
        };
        log.records.push(trainer.step(&Batch { supervised, pairs })?);
    }
    Ok((trainer.regressor, trainer.context, log))
}

/// Anchors of each pair: the frozen baseline's estimates of both frames.
pub fn baseline_anchors(baseline: &Regressor, pairs: &[UnlabeledPair<'_>]) -> Result<Vec<[ParamVector; 2]>> {
    let images: Vec<Vec<f32>> = pairs
        .iter()
        .flat_map(|p| [p.image_1.to_unit(), p.image_2.to_unit()])
        .collect();
    let refs: Vec<&[f32]> = images.iter().map(|v| v.as_slice()).collect();
    let preds = predict_batched(baseline, None, &refs, &vec![&[][..]; refs.len()])?;
    Ok(preds.chunks(2).map(|c| [as_vector(&c[0]), as_vector(&c[1])]).collect())
}

/// Label-free refinement: flow consistency plus unsquared pulls toward the
/// frozen baseline's own estimates.
pub fn refine_anchored_unsupervised<'a>(
    template: &MeshTemplate,
    baseline: &Regressor,
    pairs: &'a [UnlabeledPair<'a>],
    config: &TrainConfig,
) -> Result<(Regressor, TrainLog)> {
    let mut pool = PairPool::new(pairs, config, None)?;
    pool.anchors = Some(baseline_anchors(baseline, pairs)?);
    let cfg = TrainConfig {
        context_length: 0,
        ..config.clone()
    };
    let mut trainer = Trainer::new(template, baseline.clone(), None, cfg)?;
    let mut log = TrainLog::default();
    for _ in 0..config.steps {
        let pairs = pool.sample(config.pair_batch, config);
        log.records.push(trainer.step(&Batch {
            supervised: Vec::new(),
            pairs,
        })?);
    }
    Ok((trainer.regressor, log))
}
