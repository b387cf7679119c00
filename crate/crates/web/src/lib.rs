//! WebAssembly bindings for the static demo page in `www/`.

use flowfit::body::{BodyParams, CameraParams, ImageSize, MeshTemplate, NUM_BETAS, NUM_JOINTS};
use flowfit::eval::{joints_mm, pmpjpe};
use flowfit::render::{ground_truth_flow, render};
use flowfit::supervision::{bidirectional_flow_loss, FlowLossOptions, PairFlows};
use nalgebra::Vector3;
use wasm_bindgen::prelude::*;

const LEFT_SHOULDER: usize = 16;
const RIGHT_SHOULDER: usize = 17;
const LEFT_HIP: usize = 1;
const RIGHT_HIP: usize = 2;
const LEFT_KNEE: usize = 4;

/// A handful of slider-controlled degrees of freedom.
#[wasm_bindgen]
#[derive(Clone, Copy, Debug, Default)]
pub struct Pose {
    pub yaw: f64,
    pub arms: f64,
    pub stride: f64,
    pub knee: f64,
    pub shape: f64,
}

#[wasm_bindgen]
impl Pose {
    #[wasm_bindgen(constructor)]
    pub fn new(yaw: f64, arms: f64, stride: f64, knee: f64, shape: f64) -> Pose {
        Pose { yaw, arms, stride, knee, shape }
    }
}

impl Pose {
    fn params(&self, scale: f64, tx: f64, ty: f64) -> Result<BodyParams, JsError> {
        let mut theta = vec![[0.0; 3]; NUM_JOINTS];
        theta[0][1] = self.yaw;
        theta[LEFT_SHOULDER][2] = self.arms;
        theta[RIGHT_SHOULDER][2] = -self.arms;
        theta[LEFT_HIP][0] = self.stride;
        theta[RIGHT_HIP][0] = -self.stride;
        theta[LEFT_KNEE][0] = self.knee;
        let mut beta = [0.0; NUM_BETAS];
        beta[0] = self.shape;
        let camera = CameraParams::new(scale, tx, ty).map_err(to_js)?;
        BodyParams::new(&theta, beta, camera).map_err(to_js)
    }
}

fn to_js(e: flowfit::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Renders `pose` as RGBA pixels for a `size`×`size` canvas.
#[wasm_bindgen]
pub fn render_pose(pose: &Pose, size: usize, appearance_seed: u64) -> Result<Vec<u8>, JsError> {
    let template = MeshTemplate::default_humanoid();
    let params = pose.params(0.85, 0.0, -0.02)?;
    let frame = render(&template, &params, ImageSize::new(size, size), appearance_seed);
    Ok(frame
        .to_rgb8()
        .chunks(3)
        .flat_map(|c| [c[0], c[1], c[2], 255])
        .collect())
}

#[wasm_bindgen]
#[derive(Clone, Copy, Debug)]
pub struct FlowLossSummary {
    pub loss: f64,
    pub unscaled_loss: f64,
    pub visible_count: usize,
    pub clipped_vertex_count: usize,
    pub mean_flow_norm: f64,
}

/// Exact flow from `before` to `after`, scored against predictions equal to
/// the true poses with the second one displaced by `(dx, dy)` pixels.
#[wasm_bindgen]
pub fn flow_loss(
    before: &Pose,
    after: &Pose,
    dx: f64,
    dy: f64,
    size: usize,
    threshold: bool,
    scale: bool,
) -> Result<FlowLossSummary, JsError> {
    let template = MeshTemplate::default_humanoid();
    let image = ImageSize::new(size, size);
    let gt_1 = before.params(0.85, 0.0, -0.02)?;
    let gt_2 = after.params(0.85, 0.0, -0.02)?;
    let forward_flow = ground_truth_flow(&template, &gt_1, &gt_2, image);
    let backward_flow = ground_truth_flow(&template, &gt_2, &gt_1, image);
    let half = size as f64 / 2.0;
    let shifted = after.params(0.85, dx / (0.85 * half), -0.02 + dy / (0.85 * half))?;
    let options = FlowLossOptions {
        threshold,
        scale,
        ..Default::default()
    };
    let flows = PairFlows {
        forward: &forward_flow,
        backward: Some(&backward_flow),
    };
    let r = bidirectional_flow_loss(&template, &gt_1, &shifted, flows, options).report;
    Ok(FlowLossSummary {
        loss: r.loss,
        unscaled_loss: r.unscaled_loss,
        visible_count: r.visible_count,
        clipped_vertex_count: r.clipped_vertex_count,
        mean_flow_norm: r.mean_flow_norm,
    })
}

/// P-MPJPE (mm) of `pose` against itself after a rotation of `angle`
/// radians about the vertical axis, a scaling and a per-joint offset of
/// `noise_mm` along alternating axes.
#[wasm_bindgen]
pub fn procrustes_error(pose: &Pose, angle: f64, scale: f64, noise_mm: f64) -> Result<f64, JsError> {
    let template = MeshTemplate::default_humanoid();
    let gt = joints_mm(&template, &[pose.params(0.85, 0.0, 0.0)?]).remove(0);
    let rot = nalgebra::Rotation3::from_axis_angle(&Vector3::y_axis(), angle);
    let pred: Vec<Vector3<f64>> = gt
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let mut offset = Vector3::zeros();
            offset[j % 3] = if j % 2 == 0 { noise_mm } else { -noise_mm };
            scale * (rot * (p + offset))
        })
        .collect();
    pmpjpe(&pred, &gt).map_err(to_js)
}

/// Number of mesh vertices, for display.
#[wasm_bindgen]
pub fn vertex_count() -> usize {
    MeshTemplate::default_humanoid().num_vertices()
}
