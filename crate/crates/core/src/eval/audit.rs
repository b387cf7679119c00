//! Compares motion implied by optical flow and by per-frame body estimates
//! against ground-truth keypoint motion.

use std::fmt::Write as _;

use nalgebra::Vector2;

use crate::body::{BodyParams, ImageSize, MeshTemplate, ProjectedBody};
use crate::error::{Error, Result};
use crate::render::{ground_truth_flow, FlowMap, PosedScene, RenderSettings};

/// Front surfaces closer than this (in meters) to a joint's depth leave the
/// joint counted as visible; it bounds the limb radius of the template.
pub const KEYPOINT_DEPTH_TOLERANCE: f64 = 0.15;
/// Below this flow discrepancy (pixels) a sample's ratio is flagged.
pub const DEGENERATE_DISTANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct FlowQualityReport {
    pub ratio_mean: f64,
    pub ratio_median: f64,
    pub delta_t: usize,
    pub resolution: String,
    pub oracle: bool,
    pub sample_count: usize,
    pub dropped_samples: usize,
    /// Samples whose flow discrepancy fell below [`DEGENERATE_DISTANCE`];
    /// their ratio uses that floor.
    pub degenerate_samples: usize,
    pub mean_flow_distance: f64,
    pub mean_body_distance: f64,
}

impl FlowQualityReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "ratio_mean={}", self.ratio_mean).unwrap();
        writeln!(s, "ratio_median={}", self.ratio_median).unwrap();
        writeln!(s, "delta_t={}", self.delta_t).unwrap();
        writeln!(s, "resolution={}", self.resolution).unwrap();
        writeln!(s, "oracle={}", self.oracle).unwrap();
        writeln!(s, "sample_count={}", self.sample_count).unwrap();
        writeln!(s, "dropped_samples={}", self.dropped_samples).unwrap();
        writeln!(s, "degenerate_samples={}", self.degenerate_samples).unwrap();
        writeln!(s, "mean_d_of_px={}", self.mean_flow_distance).unwrap();
        writeln!(s, "mean_d_b_px={}", self.mean_body_distance).unwrap();
        s
    }
}

/// Where the flow of each audited pair comes from.
pub enum FlowSource<'a> {
    /// Exact flow rendered from the ground-truth bodies.
    Oracle,
    /// Precomputed maps, `maps[sequence][t]` from frame `t` to `t + delta_t`.
    Maps(&'a [Vec<FlowMap>]),
}

/// Joints that project inside the frame and are not hidden behind a surface
/// farther than the tolerance in front of them.
pub fn visible_keypoints(template: &MeshTemplate, params: &BodyParams, size: ImageSize) -> (Vec<Vector2<f64>>, Vec<bool>) {
    let settings = RenderSettings::default();
    let scene = PosedScene::new(template, params, size, settings);
    let body = ProjectedBody::new(template, params, size);
    let visible = body
        .joints_2d
        .iter()
        .zip(&scene.mesh.joints)
        .map(|(p, j)| {
            let depth = j.z + settings.camera_distance;
            size.contains(p) && scene.depth_at(p) >= depth - KEYPOINT_DEPTH_TOLERANCE
        })
        .collect();
    (body.joints_2d, visible)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Flow-quality audit over every frame pair `(t, t + delta_t)`.
///
/// `F_GT` is the displacement of ground-truth keypoints, `F_B` that of the
/// predicted bodies' projected joints, and `F_OF` the flow sampled at the
/// predicted frame-1 joints (at the ground-truth ones when `oracle`). Per
/// sample, `d_OF` and `d_B` average `|F_OF - F_GT|` and `|F_B - F_GT|`
/// over keypoints visible in both frames.
pub fn flow_quality_audit(
    template: &MeshTemplate,
    ground_truth: &[Vec<BodyParams>],
    predictions: &[Vec<BodyParams>],
    flow: FlowSource<'_>,
    size: ImageSize,
    delta_t: usize,
    oracle: bool,
) -> Result<FlowQualityReport> {
    if delta_t == 0 {
        return Err(Error::Config("delta_t must be at least 1".into()));
    }
    if ground_truth.len() != predictions.len() {
        return Err(Error::Length {
            expected: ground_truth.len(),
            actual: predictions.len(),
        });
    }
    let mut ratios = Vec::new();
    let (mut dropped, mut degenerate) = (0, 0);
    let (mut sum_of, mut sum_b) = (0.0, 0.0);
    for (s, (gt, pred)) in ground_truth.iter().zip(predictions).enumerate() {
        let keypoints: Vec<_> = gt.iter().map(|p| visible_keypoints(template, p, size)).collect();
        let projected: Vec<_> = pred.iter().map(|p| ProjectedBody::new(template, p, size).joints_2d).collect();
        for t in 0..gt.len().saturating_sub(delta_t) {
            let owned;
            let map = match &flow {
                FlowSource::Oracle => {
                    owned = ground_truth_flow(template, &gt[t], &gt[t + delta_t], size);
                    &owned
                }
                FlowSource::Maps(maps) => maps
                    .get(s)
                    .and_then(|m| m.get(t))
                    .ok_or_else(|| Error::Data(format!("no flow for sequence {s} frame {t}")))?,
            };
            let (k1, v1) = &keypoints[t];
            let (k2, v2) = &keypoints[t + delta_t];
            let (b1, b2) = (&projected[t], &projected[t + delta_t]);
            let (mut d_of, mut d_b, mut n) = (0.0, 0.0, 0usize);
            for j in 0..k1.len() {
                if !(v1[j] && v2[j]) {
                    continue;
                }
                let at = if oracle { k1[j] } else { b1[j] };
                let Some(f_of) = map.sample(&at) else { continue };
                let f_gt = k2[j] - k1[j];
                d_of += (f_of - f_gt).norm();
                d_b += (b2[j] - b1[j] - f_gt).norm();
                n += 1;
            }
            if n < 3 {
                dropped += 1;
                continue;
            }
            let (d_of, d_b) = (d_of / n as f64, d_b / n as f64);
            if d_of < DEGENERATE_DISTANCE {
                degenerate += 1;
            }
            sum_of += d_of;
            sum_b += d_b;
            ratios.push(d_b / d_of.max(DEGENERATE_DISTANCE));
        }
    }
    if ratios.is_empty() {
        return Err(Error::Data("no pair has three visible keypoints".into()));
    }
    let count = ratios.len();
    let ratio_mean = ratios.iter().sum::<f64>() / count as f64;
    Ok(FlowQualityReport {
        ratio_mean,
        ratio_median: median(&mut ratios),
        delta_t,
        resolution: format!("{}x{}", size.width, size.height),
        oracle,
        sample_count: count,
        dropped_samples: dropped,
        degenerate_samples: degenerate,
        mean_flow_distance: sum_of / count as f64,
        mean_body_distance: sum_b / count as f64,
    })
}
