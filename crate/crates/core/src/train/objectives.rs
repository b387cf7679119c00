//! Supervised and anchoring objectives with their gradients on the
//! flattened 85-vector of body parameters.

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::body::rotation::{axis_angle_to_matrix, axis_angle_vjp};
use crate::body::{
    BodyGradients, BodyParams, ImageSize, MeshTemplate, ProjectedBody, BETA_OFFSET, CAMERA_OFFSET, NUM_JOINTS,
    PARAM_DIM,
};

/// Relative weights of the supervised terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SupervisedWeights {
    pub rotation: f64,
    pub shape: f64,
    pub camera: f64,
    pub joints_2d: f64,
    pub joints_3d: f64,
}

impl Default for SupervisedWeights {
    fn default() -> Self {
        Self {
            rotation: 1.0,
            shape: 0.1,
            camera: 1.0,
            joints_2d: 1.0,
            joints_3d: 10.0,
        }
    }
}

/// Ground truth of one labeled frame, with derived quantities cached.
#[derive(Clone, Debug)]
pub struct SupervisedTarget {
    pub params: BodyParams,
    values: Vec<f64>,
    rotations: Vec<Matrix3<f64>>,
    joints_rel: Vec<Vector3<f64>>,
    joints_2d: Vec<Vector2<f64>>,
}

impl SupervisedTarget {
    pub fn new(template: &MeshTemplate, params: &BodyParams, size: ImageSize) -> Self {
        let body = ProjectedBody::new(template, params, size);
        let root = body.mesh.joints[0];
        Self {
            params: params.clone(),
            values: params.to_vec(),
            rotations: (0..NUM_JOINTS).map(|j| axis_angle_to_matrix(&params.joint_rotation(j))).collect(),
            joints_rel: body.mesh.joints.iter().map(|j| j - root).collect(),
            joints_2d: body.joints_2d,
        }
    }
}

/// Unweighted values of each supervised term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SupervisedTerms {
    pub rotation: f64,
    pub shape: f64,
    pub camera: f64,
    pub joints_2d: f64,
    pub joints_3d: f64,
}

impl SupervisedTerms {
    pub fn weighted(&self, w: &SupervisedWeights) -> f64 {
        w.rotation * self.rotation
            + w.shape * self.shape
            + w.camera * self.camera
            + w.joints_2d * self.joints_2d
            + w.joints_3d * self.joints_3d
    }
}

/// Rotation-matrix, shape and camera squared errors plus 2D (normalized
/// image units) and root-relative 3D joint squared errors.
pub fn supervised_loss(
    template: &MeshTemplate,
    pred: &BodyParams,
    target: &SupervisedTarget,
    size: ImageSize,
    weights: &SupervisedWeights,
) -> (SupervisedTerms, [f64; PARAM_DIM]) {
    let mut grad = [0.0; PARAM_DIM];
    let mut terms = SupervisedTerms::default();
    let nj = NUM_JOINTS as f64;

    for j in 0..NUM_JOINTS {
        let w = pred.joint_rotation(j);
        let diff = axis_angle_to_matrix(&w) - target.rotations[j];
        terms.rotation += diff.norm_squared() / nj;
        let g = axis_angle_vjp(&w, &(diff * (2.0 * weights.rotation / nj)));
        grad[3 * j..3 * j + 3].copy_from_slice(g.as_slice());
    }
    let values = pred.to_vec();
    for k in BETA_OFFSET..CAMERA_OFFSET {
        let d = values[k] - target.values[k];
        terms.shape += d * d / 10.0;
        grad[k] += 2.0 * weights.shape * d / 10.0;
    }
    for k in CAMERA_OFFSET..PARAM_DIM {
        let d = values[k] - target.values[k];
        terms.camera += d * d / 3.0;
        grad[k] += 2.0 * weights.camera * d / 3.0;
    }

    let body = ProjectedBody::new(template, pred, size);
    let half = size.half_extent();
    let mut g2 = vec![Vector2::zeros(); NUM_JOINTS];
    for (j, g) in g2.iter_mut().enumerate() {
        let d = (body.joints_2d[j] - target.joints_2d[j]).component_div(&half);
        terms.joints_2d += d.norm_squared() / nj;
        *g = (d * (2.0 * weights.joints_2d / nj)).component_div(&half);
    }
    let root = body.mesh.joints[0];
    let mut g3 = vec![Vector3::zeros(); NUM_JOINTS];
    for j in 0..NUM_JOINTS {
        let d = body.mesh.joints[j] - root - target.joints_rel[j];
        terms.joints_3d += d.norm_squared() / nj;
        let g = d * (2.0 * weights.joints_3d / nj);
        g3[j] += g;
        g3[0] -= g;
    }
    let from_body = body.backward(
        template,
        BodyGradients {
            joints_2d: &g2,
            joints_3d: &g3,
            ..Default::default()
        },
    );
    grad.iter_mut().zip(from_body).for_each(|(a, b)| *a += b);
    (terms, grad)
}

/// Unsquared distances of pose and shape from an anchor estimate.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AnchorTerms {
    pub pose: f64,
    pub shape: f64,
}

/// `‖θ⁰ − θ‖ ` and `‖β⁰ − β‖` with their gradients (zero at the anchor),
/// weighted by `lambda_pose` and `lambda_shape` in the returned gradient.
pub fn anchor_loss(
    pred: &[f64; PARAM_DIM],
    anchor: &[f64; PARAM_DIM],
    lambda_pose: f64,
    lambda_shape: f64,
) -> (AnchorTerms, [f64; PARAM_DIM]) {
    let mut grad = [0.0; PARAM_DIM];
    let mut norm_of = |range: std::ops::Range<usize>, lambda: f64| {
        let n = range.clone().map(|k| (pred[k] - anchor[k]).powi(2)).sum::<f64>().sqrt();
        if n > 0.0 {
            for k in range {
                grad[k] = lambda * (pred[k] - anchor[k]) / n;
            }
        }
        n
    };
    let pose = norm_of(0..BETA_OFFSET, lambda_pose);
    let shape = norm_of(BETA_OFFSET..CAMERA_OFFSET, lambda_shape);
    (AnchorTerms { pose, shape }, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::{CameraParams, NUM_BETAS};
    use crate::gradcheck::{finite_difference_gradient, max_relative_error};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng) -> BodyParams {
        let theta: Vec<[f64; 3]> = (0..NUM_JOINTS).map(|_| [0; 3].map(|_| rng.random_range(-0.5..0.5))).collect();
        let beta = [0.0; NUM_BETAS].map(|_: f64| rng.random_range(-0.5..0.5));
        BodyParams::new(&theta, beta, CameraParams::new(rng.random_range(0.7..1.0), 0.05, -0.02).unwrap()).unwrap()
    }

    #[test]
    fn supervised_gradient_matches_finite_differences() {
        let template = MeshTemplate::default_humanoid();
        let size = ImageSize::new(64, 64);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let target = SupervisedTarget::new(&template, &random(&mut rng), size);
        let pred = random(&mut rng);
        let weights = SupervisedWeights::default();
        let (_, grad) = supervised_loss(&template, &pred, &target, size, &weights);
        let numeric = finite_difference_gradient(
            |x: &[f64]| {
                let p = BodyParams::from_slice(x).unwrap();
                supervised_loss(&template, &p, &target, size, &weights).0.weighted(&weights)
            },
            &pred.to_vec(),
            1e-6,
        )
        .unwrap();
        let scale = numeric.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        assert!(max_relative_error(&grad, &numeric, 1e-4 * scale) < 1e-5);
    }

    #[test]
    fn exact_prediction_costs_nothing() {
        let template = MeshTemplate::default_humanoid();
        let size = ImageSize::new(64, 64);
        let p = random(&mut ChaCha8Rng::seed_from_u64(3));
        let target = SupervisedTarget::new(&template, &p, size);
        let (terms, grad) = supervised_loss(&template, &p, &target, size, &SupervisedWeights::default());
        assert!(terms.weighted(&SupervisedWeights::default()) < 1e-20);
        assert!(grad.iter().all(|g| g.abs() < 1e-9));
    }

    #[test]
    fn anchor_is_unsquared_and_flat_at_zero() {
        let anchor = [0.0; PARAM_DIM];
        let mut pred = anchor;
        pred[0] = 3.0;
        pred[1] = 4.0;
        pred[BETA_OFFSET] = -2.0;
        let (terms, grad) = anchor_loss(&pred, &anchor, 1.0, 0.5);
        assert_eq!((terms.pose, terms.shape), (5.0, 2.0));
        assert!((grad[0] - 0.6).abs() < 1e-12 && (grad[BETA_OFFSET] + 0.5).abs() < 1e-12);
        let (zero, g0) = anchor_loss(&anchor, &anchor, 1.0, 1.0);
        assert_eq!((zero.pose, zero.shape), (0.0, 0.0));
        assert!(g0.iter().all(|&g| g == 0.0));
    }
}
