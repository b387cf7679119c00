//! Spread of per-pair flow losses with and without magnitude scaling.

use crate::body::{BodyParams, MeshTemplate, ProjectedBody};
use crate::data::UnlabeledPair;
use crate::error::{Error, Result};
use crate::supervision::{plan_flow_loss, FlowLossOptions, PairFlows};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowLossSample {
    pub scaled: f64,
    pub unscaled: f64,
    pub mean_flow_norm: f64,
}

/// Flow loss of each pair under `predictions[i]` (estimates of both
/// frames). Pairs with an empty visibility intersection are left out.
pub fn flow_loss_samples(
    template: &MeshTemplate,
    pairs: &[UnlabeledPair<'_>],
    predictions: &[[BodyParams; 2]],
    options: FlowLossOptions,
) -> Result<Vec<FlowLossSample>> {
    if pairs.len() != predictions.len() {
        return Err(Error::Length {
            expected: pairs.len(),
            actual: predictions.len(),
        });
    }
    let scaled_options = FlowLossOptions { scale: true, ..options };
    Ok(pairs
        .iter()
        .zip(predictions)
        .filter_map(|(pair, [p1, p2])| {
            let size = pair.flow_1to2.size();
            let (b1, b2) = (ProjectedBody::new(template, p1, size), ProjectedBody::new(template, p2, size));
            let flows = PairFlows {
                forward: pair.flow_1to2,
                backward: pair.flow_2to1,
            };
            let (report, _) = plan_flow_loss(template, &b1, &b2, flows, scaled_options);
            (!report.empty_mask).then_some(FlowLossSample {
                scaled: report.loss,
                unscaled: report.unscaled_loss,
                mean_flow_norm: report.mean_flow_norm,
            })
        })
        .collect())
}

/// Standard deviation over mean (population form).
pub fn coefficient_of_variation(values: &[f64]) -> Result<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 || mean.abs() < f64::MIN_POSITIVE {
        return Err(Error::Degenerate("coefficient of variation needs two values with nonzero mean".into()));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt() / mean.abs())
}
