//! Direct optimization of a sequence of body estimates, leaving network
//! weights untouched.

use super::config::TrainConfig;
use super::objectives::anchor_loss;
use super::trainer::{as_vector, predict_batched, ParamVector, StepRecord, TrainLog};
use crate::body::{BodyParams, MeshTemplate, CAMERA_OFFSET, PARAM_DIM};
use crate::data::Sequence;
use crate::error::{Error, Result};
use crate::nn::{params_grad_to_raw, raw_to_params, Adam, Regressor};
use crate::supervision::{bidirectional_flow_loss, PairFlows};

/// Centered moving average over `window` frames, truncated at the ends.
pub fn moving_average(values: &[ParamVector], window: usize) -> Vec<ParamVector> {
    let n = values.len();
    let half_lo = (window - 1) / 2;
    let half_hi = window / 2;
    (0..n)
        .map(|t| {
            let lo = t.saturating_sub(half_lo);
            let hi = (t + half_hi).min(n - 1);
            let mut acc = [0.0; PARAM_DIM];
            for v in &values[lo..=hi] {
                acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
            }
            acc.map(|a| a / (hi - lo + 1) as f64)
        })
        .collect()
}

fn to_raw(p: &BodyParams) -> ParamVector {
    let mut v = as_vector(p);
    v[CAMERA_OFFSET] = v[CAMERA_OFFSET].ln();
    v
}

/// Refines per-frame estimates of one sequence by gradient descent on flow
/// consistency, unsquared anchors to `initial` and, when `lambda_smooth > 0`,
/// a squared pull of pose and shape toward their moving average (held
/// constant within each step).
pub fn optimize_trajectory(
    template: &MeshTemplate,
    initial: &[BodyParams],
    sequence: &Sequence,
    config: &TrainConfig,
) -> Result<(Vec<BodyParams>, TrainLog)> {
    config.validate()?;
    let t_len = initial.len();
    if t_len < 2 {
        return Err(Error::Data(format!("sequence optimization needs at least 2 frames, got {t_len}")));
    }
    if sequence.forward_flows.len() + 1 < t_len {
        return Err(Error::Data("sequence has fewer flows than frame pairs".into()));
    }
    let anchors: Vec<ParamVector> = initial.iter().map(as_vector).collect();
    let mut raw: Vec<f64> = initial.iter().flat_map(to_raw).collect();
    let mut opt = Adam::new(raw.len(), config.learning_rate);
    let opts = config.flow_options();
    let mut log = TrainLog::default();
    let smooth_dims = CAMERA_OFFSET;

    for step in 0..config.steps {
        let current: Vec<BodyParams> = raw
            .chunks(PARAM_DIM)
            .map(|c| raw_to_params(c.try_into().expect("85 entries")))
            .collect::<Result<_>>()?;
        let values: Vec<ParamVector> = current.iter().map(as_vector).collect();
        let mut grads = vec![[0.0; PARAM_DIM]; t_len];
        let mut record = StepRecord {
            step: step + 1,
            ..Default::default()
        };

        if config.lambda_of > 0.0 {
            let w = config.lambda_of / (t_len - 1) as f64;
            for t in 0..t_len - 1 {
                let flows = PairFlows {
                    forward: &sequence.forward_flows[t],
                    backward: sequence.backward_flows.get(t),
                };
                let eval = bidirectional_flow_loss(template, &current[t], &current[t + 1], flows, opts);
                if eval.report.empty_mask {
                    record.skipped_pairs += 1;
                    continue;
                }
                record.flow += w * eval.report.loss;
                record.flow_unscaled += eval.report.unscaled_loss / (t_len - 1) as f64;
                grads[t].iter_mut().zip(&eval.grad_1).for_each(|(a, b)| *a += w * b);
                grads[t + 1].iter_mut().zip(&eval.grad_2).for_each(|(a, b)| *a += w * b);
            }
        }
        let per_frame = 1.0 / t_len as f64;
        for t in 0..t_len {
            let (terms, g) = anchor_loss(&values[t], &anchors[t], config.lambda_pose, config.lambda_shape);
            record.anchor += per_frame * (config.lambda_pose * terms.pose + config.lambda_shape * terms.shape);
            grads[t].iter_mut().zip(&g).for_each(|(a, b)| *a += per_frame * b);
        }
        if config.lambda_smooth > 0.0 {
            let avg = moving_average(&values, config.smoothing_window);
            let w = config.lambda_smooth * per_frame;
            for t in 0..t_len {
                for k in 0..smooth_dims {
                    let d = values[t][k] - avg[t][k];
                    record.smoothing += w * d * d;
                    grads[t][k] += 2.0 * w * d;
                }
            }
        }
        record.total = record.parts_sum();
        if !record.total.is_finite() {
            return Err(Error::Degenerate(format!("non-finite objective at step {}", step + 1)));
        }
        let flat: Vec<f64> = grads
            .iter()
            .zip(raw.chunks(PARAM_DIM))
            .flat_map(|(g, r)| params_grad_to_raw(g, r.try_into().expect("85 entries")))
            .collect();
        opt.step(&mut raw, &flat);
        log.records.push(record);
    }
    let out = raw
        .chunks(PARAM_DIM)
        .map(|c| raw_to_params(c.try_into().expect("85 entries")))
        .collect::<Result<Vec<_>>>()?;
    Ok((out, log))
}

/// Baseline estimates of every frame followed by trajectory optimization.
pub fn optimize_sequence(
    template: &MeshTemplate,
    baseline: &Regressor,
    sequence: &Sequence,
    config: &TrainConfig,
) -> Result<(Vec<BodyParams>, TrainLog)> {
    let images: Vec<Vec<f32>> = sequence.frames.iter().map(|f| f.to_unit()).collect();
    let refs: Vec<&[f32]> = images.iter().map(|v| v.as_slice()).collect();
    let initial = predict_batched(baseline, None, &refs, &vec![&[][..]; refs.len()])?;
    optimize_trajectory(template, &initial, sequence, config)
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moving_average_of_constant_is_constant() {
        let v = vec![[2.0; PARAM_DIM]; 7];
        assert_eq!(moving_average(&v, 30), v);
    }

    #[test]
    fn moving_average_window_three() {
        let v: Vec<ParamVector> = (0..4).map(|t| [t as f64; PARAM_DIM]).collect();
        let avg = moving_average(&v, 3);
        assert_eq!(avg.iter().map(|a| a[0]).collect::<Vec<_>>(), vec![0.5, 1.0, 2.0, 2.5]);
    }
}
