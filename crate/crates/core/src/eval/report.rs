use std::fmt::Write as _;

use nalgebra::Vector3;

use super::metrics::{acceleration_error, pmpjpe};
use crate::body::{forward, BodyParams, MeshTemplate};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{ContextNet, Regressor};
use crate::parallel::map_indexed;
use crate::train::{predict_batched, PredictionCache};

/// Millimeters per template unit.
pub const MM_PER_METER: f64 = 1000.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceMetrics {
    pub sequence: usize,
    pub frames: usize,
    pub pmpjpe: f64,
    pub accel_err: f64,
}

/// Pose accuracy (mm) and smoothness (mm/s²) over a set of sequences.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub pmpjpe: f64,
    pub accel_err: f64,
    pub per_sequence: Vec<SequenceMetrics>,
    pub sample_count: usize,
}

impl MetricReport {
    /// One `key=value` record per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "pmpjpe_mm={}", self.pmpjpe).unwrap();
        writeln!(s, "accel_err_mm_s2={}", self.accel_err).unwrap();
        writeln!(s, "sample_count={}", self.sample_count).unwrap();
        writeln!(s, "sequence_count={}", self.per_sequence.len()).unwrap();
        for m in &self.per_sequence {
            writeln!(s, "sequence.{}.frames={}", m.sequence, m.frames).unwrap();
            writeln!(s, "sequence.{}.pmpjpe_mm={}", m.sequence, m.pmpjpe).unwrap();
            writeln!(s, "sequence.{}.accel_err_mm_s2={}", m.sequence, m.accel_err).unwrap();
        }
        s
    }
}

/// Model-space joints of each estimate, in millimeters.
pub fn joints_mm(template: &MeshTemplate, params: &[BodyParams]) -> Vec<Vec<Vector3<f64>>> {
    params
        .iter()
        .map(|p| forward(template, p).joints.iter().map(|j| j * MM_PER_METER).collect())
        .collect()
}

/// Frame-averaged P-MPJPE and sequence-averaged Accel.Err. Sequences
/// shorter than 3 frames contribute to P-MPJPE only.
pub fn evaluate_sequences(
    template: &MeshTemplate,
    predictions: &[Vec<BodyParams>],
    ground_truth: &[Vec<BodyParams>],
    fps: f64,
) -> Result<MetricReport> {
    if predictions.len() != ground_truth.len() {
        return Err(Error::Length {
            expected: ground_truth.len(),
            actual: predictions.len(),
        });
    }
    let mut per_sequence = Vec::with_capacity(predictions.len());
    let (mut err_sum, mut frames) = (0.0, 0usize);
    let (mut accel_sum, mut accel_count) = (0.0, 0usize);
    for (s, (pred, gt)) in predictions.iter().zip(ground_truth).enumerate() {
        if pred.len() != gt.len() {
            return Err(Error::Data(format!("sequence {s}: {} predictions for {} frames", pred.len(), gt.len())));
        }
        let (pj, gj) = (joints_mm(template, pred), joints_mm(template, gt));
        let errs = pj.iter().zip(&gj).map(|(p, g)| pmpjpe(p, g)).collect::<Result<Vec<_>>>()?;
        let seq_err = errs.iter().sum::<f64>() / errs.len().max(1) as f64;
        let accel = if gt.len() >= 3 {
            let a = acceleration_error(&pj, &gj, fps)?;
            accel_sum += a;
            accel_count += 1;
            a
        } else {
            0.0
        };
        err_sum += errs.iter().sum::<f64>();
        frames += errs.len();
        per_sequence.push(SequenceMetrics {
            sequence: s,
            frames: errs.len(),
            pmpjpe: seq_err,
            accel_err: accel,
        });
    }
    if frames == 0 {
        return Err(Error::Data("nothing to evaluate".into()));
    }
    Ok(MetricReport {
        pmpjpe: err_sum / frames as f64,
        accel_err: if accel_count > 0 { accel_sum / accel_count as f64 } else { 0.0 },
        per_sequence,
        sample_count: frames,
    })
}

/// Estimates for every frame of every sequence. With a context network, the
/// history of each frame is read from `history` (the baseline's estimates).
pub fn predict_dataset(
    regressor: &Regressor,
    context: Option<(&ContextNet, &PredictionCache, usize)>,
    dataset: &Dataset,
    workers: usize,
) -> Result<Vec<Vec<BodyParams>>> {
    map_indexed(dataset.sequences.len(), workers, |s| {
        let images: Vec<Vec<f32>> = dataset.sequences[s].frames.iter().map(|f| f.to_unit()).collect();
        let refs: Vec<&[f32]> = images.iter().map(|v| v.as_slice()).collect();
        match context {
            Some((net, cache, len)) => {
                let hist: Vec<_> = (0..refs.len()).map(|f| cache.history(s, f, len)).collect();
                predict_batched(regressor, Some(net), &refs, &hist)
            }
            None => predict_batched(regressor, None, &refs, &vec![&[][..]; refs.len()]),
        }
    })
    .into_iter()
    .collect()
}

/// Ground-truth parameters of every frame; fails on unlabeled frames.
pub fn ground_truth(dataset: &Dataset) -> Result<Vec<Vec<BodyParams>>> {
    (0..dataset.sequences.len())
        .map(|s| {
            (0..dataset.sequences[s].len())
                .map(|f| {
                    dataset
                        .labels
                        .get(s, f)
                        .cloned()
                        .ok_or_else(|| Error::Data(format!("frame {f} of sequence {s} has no label")))
                })
                .collect()
        })
        .collect()
}

/// Metrics of `regressor` (optionally context-modulated) on `dataset`.
pub fn evaluate_model(
    template: &MeshTemplate,
    regressor: &Regressor,
    context: Option<(&ContextNet, &PredictionCache, usize)>,
    dataset: &Dataset,
    workers: usize,
) -> Result<MetricReport> {
    let pred = predict_dataset(regressor, context, dataset, workers)?;
    evaluate_sequences(template, &pred, &ground_truth(dataset)?, dataset.fps)
}
