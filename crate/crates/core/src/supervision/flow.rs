//! Masked, bidirectional optical-flow consistency loss.
//!
//! For a vertex with projections `p1` and `p2`, the directional residual is
//! `(p2 - p1) - F12[p1]`, i.e. the distance of `p2` from the weak label
//! `p1 + F12[p1]`. Residual norms are averaged over the visible vertices,
//! optionally with outliers dropped and the result divided by the mean flow
//! magnitude.

use nalgebra::{Matrix2, Vector2};

use crate::body::{BodyGradients, BodyParams, MeshTemplate, ProjectedBody, PARAM_DIM};
use crate::render::{FlowMap, PosedScene, RenderSettings, VisibilityMask};

/// Floor on the flow magnitude used for scaling, in pixels.
pub const EPS_FLOW: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowLossOptions {
    pub threshold: bool,
    pub scale: bool,
    pub eps_flow: f64,
}

impl Default for FlowLossOptions {
    fn default() -> Self {
        Self {
            threshold: true,
            scale: true,
            eps_flow: EPS_FLOW,
        }
    }
}

/// One direction of the loss before thresholding and scaling.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionalLoss {
    /// Mean residual norm over the active vertices.
    pub loss: f64,
    /// Residual of each active vertex, `None` elsewhere.
    pub residuals: Vec<Option<Vector2<f64>>>,
    /// Norm of the sampled flow at each active vertex, zero elsewhere.
    pub flow_norms: Vec<f64>,
    /// Masked vertices whose flow sample is in bounds.
    pub active: Vec<usize>,
    /// No vertex contributed.
    pub empty: bool,
}

impl DirectionalLoss {
    pub fn mean_flow_norm(&self) -> f64 {
        if self.active.is_empty() {
            return 0.0;
        }
        self.active.iter().map(|&v| self.flow_norms[v]).sum::<f64>() / self.active.len() as f64
    }

    pub fn max_flow_norm(&self) -> f64 {
        self.active.iter().map(|&v| self.flow_norms[v]).fold(0.0, f64::max)
    }
}

/// Residuals `(dst - src) - flow[src]` over masked vertices.
pub fn directional_flow_loss(
    proj_src: &[Vector2<f64>],
    proj_dst: &[Vector2<f64>],
    flow: &FlowMap,
    mask: &VisibilityMask,
) -> DirectionalLoss {
    let n = proj_src.len();
    let mut residuals = vec![None; n];
    let mut flow_norms = vec![0.0; n];
    let mut active = Vec::new();
    for v in (0..n).filter(|&v| mask.mask[v]) {
        if let Some(f) = flow.sample(&proj_src[v]) {
            residuals[v] = Some(proj_dst[v] - proj_src[v] - f);
            flow_norms[v] = f.norm();
            active.push(v);
        }
    }
    let loss = if active.is_empty() {
        0.0
    } else {
        active.iter().map(|&v| residuals[v].unwrap().norm()).sum::<f64>() / active.len() as f64
    };
    DirectionalLoss {
        loss,
        residuals,
        flow_norms,
        empty: active.is_empty(),
        active,
    }
}

/// Drops residuals whose norm exceeds the largest flow norm among the
/// present entries. Returns the surviving residuals and the number dropped.
pub fn threshold_residuals(residuals: &[Option<Vector2<f64>>], flow_norms: &[f64]) -> (Vec<Option<Vector2<f64>>>, usize) {
    let limit = residuals
        .iter()
        .zip(flow_norms)
        .filter(|(r, _)| r.is_some())
        .map(|(_, &f)| f)
        .fold(0.0, f64::max);
    let mut clipped = 0;
    let kept = residuals
        .iter()
        .map(|r| match r {
            Some(x) if x.norm() > limit => {
                clipped += 1;
                None
            }
            other => *other,
        })
        .collect();
    (kept, clipped)
}

/// Divides by the mean flow magnitude, floored at `eps_flow`.
pub fn scale_loss(loss: f64, mean_flow_norm: f64, eps_flow: f64) -> f64 {
    loss / mean_flow_norm.max(eps_flow)
}

fn mean_norm(residuals: &[Option<Vector2<f64>>]) -> (f64, usize) {
    let (sum, count) = residuals.iter().flatten().fold((0.0, 0), |(s, c), r| (s + r.norm(), c + 1));
    if count == 0 {
        (0.0, 0)
    } else {
        (sum / count as f64, count)
    }
}

/// Forward flow and, when available, the backward flow of a frame pair.
#[derive(Clone, Copy, Debug)]
pub struct PairFlows<'a> {
    pub forward: &'a FlowMap,
    pub backward: Option<&'a FlowMap>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowLossReport {
    pub loss_1to2: f64,
    pub loss_2to1: f64,
    /// Mean of the two directional losses, thresholded and scaled.
    pub loss: f64,
    /// Same as `loss` without the division by the mean flow magnitude.
    pub unscaled_loss: f64,
    pub visible_count: usize,
    pub mean_flow_norm: f64,
    pub max_flow_norm: f64,
    pub clipped_vertex_count: usize,
    /// The visibility intersection (or every flow sample) was empty.
    pub empty_mask: bool,
    /// Only the forward direction was available.
    pub forward_only: bool,
}

/// Decisions frozen from one evaluation: which vertices count in each
/// direction and the scaling denominator. Gradients treat these as constants.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowLossPlan {
    pub kept_forward: Vec<usize>,
    pub kept_backward: Option<Vec<usize>>,
    pub normalizer: f64,
}

/// Loss value, report and gradients with respect to both predictions.
#[derive(Clone, Debug)]
pub struct FlowLossEvaluation {
    pub report: FlowLossReport,
    pub plan: FlowLossPlan,
    pub grad_1: [f64; PARAM_DIM],
    pub grad_2: [f64; PARAM_DIM],
}

/// Bidirectional loss for predictions of two frames. Visibility is
/// recomputed from the predictions and treated as constant.
pub fn bidirectional_flow_loss(
    template: &MeshTemplate,
    pred_1: &BodyParams,
    pred_2: &BodyParams,
    flows: PairFlows<'_>,
    options: FlowLossOptions,
) -> FlowLossEvaluation {
    let size = flows.forward.size();
    let body_1 = ProjectedBody::new(template, pred_1, size);
    let body_2 = ProjectedBody::new(template, pred_2, size);
    let (report, plan) = plan_flow_loss(template, &body_1, &body_2, flows, options);
    let (_, grad_1, grad_2) = evaluate_planned(template, &body_1, &body_2, flows, &plan);
    FlowLossEvaluation {
        report,
        plan,
        grad_1,
        grad_2,
    }
}

pub fn pair_visibility(template: &MeshTemplate, body_1: &ProjectedBody, body_2: &ProjectedBody) -> VisibilityMask {
    let vis = |b: &ProjectedBody| {
        PosedScene::from_mesh(template, b.mesh.clone(), b.params(), b.size(), RenderSettings::default()).visibility()
    };
    vis(body_1).and(&vis(body_2))
}

/// Computes masks, thresholds and scaling for a pair of projected bodies.
pub fn plan_flow_loss(
    template: &MeshTemplate,
    body_1: &ProjectedBody,
    body_2: &ProjectedBody,
    flows: PairFlows<'_>,
    options: FlowLossOptions,
) -> (FlowLossReport, FlowLossPlan) {
    let mask = pair_visibility(template, body_1, body_2);
    let forward = directional_flow_loss(&body_1.vertices_2d, &body_2.vertices_2d, flows.forward, &mask);
    let backward = flows
        .backward
        .map(|f| directional_flow_loss(&body_2.vertices_2d, &body_1.vertices_2d, f, &mask));

    let reduce = |d: &DirectionalLoss| -> (f64, Vec<usize>, Vec<bool>) {
        let (kept, _) = if options.threshold {
            threshold_residuals(&d.residuals, &d.flow_norms)
        } else {
            (d.residuals.clone(), 0)
        };
        let clipped_flags = d.residuals.iter().zip(&kept).map(|(a, b)| a.is_some() && b.is_none()).collect();
        let idx = kept.iter().enumerate().filter(|(_, r)| r.is_some()).map(|(v, _)| v).collect();
        (mean_norm(&kept).0, idx, clipped_flags)
    };
    let (raw_f, kept_f, clip_f) = reduce(&forward);
    let mut clipped = clip_f;
    let (mean_flow, max_flow, raw_b, kept_b) = match &backward {
        Some(b) => {
            let (raw_b, kept_b, clip_b) = reduce(b);
            clipped.iter_mut().zip(clip_b).for_each(|(a, b)| *a |= b);
            (
                0.5 * (forward.mean_flow_norm() + b.mean_flow_norm()),
                forward.max_flow_norm().max(b.max_flow_norm()),
                raw_b,
                Some(kept_b),
            )
        }
        None => (forward.mean_flow_norm(), forward.max_flow_norm(), raw_f, None),
    };
    let normalizer = if options.scale { mean_flow.max(options.eps_flow) } else { 1.0 };
    let forward_only = backward.is_none();
    let report = FlowLossReport {
        loss_1to2: raw_f / normalizer,
        loss_2to1: raw_b / normalizer,
        loss: 0.5 * (raw_f + raw_b) / normalizer,
        unscaled_loss: 0.5 * (raw_f + raw_b),
        visible_count: mask.count(),
        mean_flow_norm: mean_flow,
        max_flow_norm: max_flow,
        clipped_vertex_count: clipped.iter().filter(|&&c| c).count(),
        empty_mask: forward.empty && backward.as_ref().is_none_or(|b| b.empty),
        forward_only,
    };
    let plan = FlowLossPlan {
        kept_forward: kept_f,
        kept_backward: kept_b,
        normalizer,
    };
    (report, plan)
}

/// Accumulates d/d(src) and d/d(dst) of `weight * sum_v |dst - src - F[src]|`.
fn directional_grad(
    src: &[Vector2<f64>],
    dst: &[Vector2<f64>],
    flow: &FlowMap,
    kept: &[usize],
    weight: f64,
    grad_src: &mut [Vector2<f64>],
    grad_dst: &mut [Vector2<f64>],
) -> f64 {
    let mut total = 0.0;
    for &v in kept {
        let Some((f, jac)) = flow.sample_with_jacobian(&src[v]) else { continue };
        let r = dst[v] - src[v] - f;
        let norm = r.norm();
        total += norm;
        if norm > 0.0 {
            let u = r / norm * weight;
            grad_dst[v] += u;
            grad_src[v] -= (Matrix2::identity() + jac).transpose() * u;
        }
    }
    total * weight
}

/// Loss value and parameter gradients under a frozen plan.
pub fn evaluate_planned(
    template: &MeshTemplate,
    body_1: &ProjectedBody,
    body_2: &ProjectedBody,
    flows: PairFlows<'_>,
    plan: &FlowLossPlan,
) -> (f64, [f64; PARAM_DIM], [f64; PARAM_DIM]) {
    let n = body_1.vertices_2d.len();
    let mut g1 = vec![Vector2::zeros(); n];
    let mut g2 = vec![Vector2::zeros(); n];
    let halves = if plan.kept_backward.is_some() { 0.5 } else { 1.0 };
    let w = |kept: &[usize]| {
        if kept.is_empty() {
            0.0
        } else {
            halves / (kept.len() as f64 * plan.normalizer)
        }
    };
    let mut value = directional_grad(
        &body_1.vertices_2d,
        &body_2.vertices_2d,
        flows.forward,
        &plan.kept_forward,
        w(&plan.kept_forward),
        &mut g1,
        &mut g2,
    );
    if let (Some(kept), Some(flow)) = (&plan.kept_backward, flows.backward) {
        value += directional_grad(&body_2.vertices_2d, &body_1.vertices_2d, flow, kept, w(kept), &mut g2, &mut g1);
    }
    let grad_1 = body_1.backward(template, BodyGradients { vertices_2d: &g1, ..Default::default() });
    let grad_2 = body_2.backward(template, BodyGradients { vertices_2d: &g2, ..Default::default() });
    (value, grad_1, grad_2)
}
