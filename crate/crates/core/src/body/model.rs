//! Linear blend skinning over the kinematic tree, with a hand-written reverse
//! pass.

use nalgebra::{Matrix3, Vector2, Vector3};

use super::camera::{project_points, project_points_vjp, ImageSize};
use super::params::{BodyParams, BETA_OFFSET, CAMERA_OFFSET, NUM_BETAS, PARAM_DIM};
use super::rotation::{axis_angle_to_matrix, axis_angle_vjp};
use super::template::MeshTemplate;

/// Posed vertices and the joints regressed from them.
#[derive(Clone, Debug, PartialEq)]
pub struct BodyMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub joints: Vec<Vector3<f64>>,
}

/// Intermediate values of one forward evaluation, kept for the reverse pass.
#[derive(Clone, Debug)]
pub struct SkinningTape {
    theta: Vec<Vector3<f64>>,
    shaped: Vec<Vector3<f64>>,
    rest_joints: Vec<Vector3<f64>>,
    local: Vec<Matrix3<f64>>,
    global_rot: Vec<Matrix3<f64>>,
}

/// Gradient with respect to pose and shape.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseShapeGrad {
    pub theta: Vec<Vector3<f64>>,
    pub beta: [f64; NUM_BETAS],
}

pub fn forward(template: &MeshTemplate, params: &BodyParams) -> BodyMesh {
    forward_with_tape(template, params).0
}

pub fn forward_with_tape(template: &MeshTemplate, params: &BodyParams) -> (BodyMesh, SkinningTape) {
    let nj = template.num_joints();
    let beta = params.beta();
    let mut shaped = template.rest_vertices().to_vec();
    for (k, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            for (v, d) in shaped.iter_mut().zip(template.shape_direction(k)) {
                *v += d * b;
            }
        }
    }
    let rest_joints = template.regress_joints(&shaped);
    let theta: Vec<Vector3<f64>> = (0..nj).map(|j| params.joint_rotation(j)).collect();
    let local: Vec<Matrix3<f64>> = theta.iter().map(axis_angle_to_matrix).collect();

    let mut global_rot = vec![Matrix3::identity(); nj];
    let mut global_t = vec![Vector3::zeros(); nj];
    for &j in template.joint_order() {
        match template.parent(j) {
            None => {
                global_rot[j] = local[j];
                global_t[j] = rest_joints[j];
            }
            Some(p) => {
                global_rot[j] = global_rot[p] * local[j];
                global_t[j] = global_rot[p] * (rest_joints[j] - rest_joints[p]) + global_t[p];
            }
        }
    }

    let vertices: Vec<Vector3<f64>> = shaped
        .iter()
        .enumerate()
        .map(|(v, x)| {
            template
                .skin(v)
                .iter()
                .map(|&(k, w)| (global_rot[k] * (x - rest_joints[k]) + global_t[k]) * w)
                .sum()
        })
        .collect();
    let joints = template.regress_joints(&vertices);
    (
        BodyMesh { vertices, joints },
        SkinningTape {
            theta,
            shaped,
            rest_joints,
            local,
            global_rot,
        },
    )
}

impl SkinningTape {
    /// Pulls gradients on posed vertices (and optionally posed joints) back to
    /// pose and shape.
    pub fn backward(
        &self,
        template: &MeshTemplate,
        grad_vertices: &[Vector3<f64>],
        grad_joints: Option<&[Vector3<f64>]>,
    ) -> PoseShapeGrad {
        let nj = template.num_joints();
        let mut gv = grad_vertices.to_vec();
        if let Some(gj) = grad_joints {
            for (j, g) in gj.iter().enumerate() {
                for &(v, w) in template.regressor_row(j) {
                    gv[v] += g * w;
                }
            }
        }

        let mut g_rot = vec![Matrix3::zeros(); nj];
        let mut g_t = vec![Vector3::zeros(); nj];
        let mut g_rest_joints = vec![Vector3::zeros(); nj];
        let mut g_shaped = vec![Vector3::zeros(); self.shaped.len()];
        for (v, g) in gv.iter().enumerate() {
            if g.x == 0.0 && g.y == 0.0 && g.z == 0.0 {
                continue;
            }
            let x = self.shaped[v];
            for &(k, w) in template.skin(v) {
                let wg = g * w;
                g_rot[k] += wg * (x - self.rest_joints[k]).transpose();
                g_t[k] += wg;
                let back = self.global_rot[k].transpose() * wg;
                g_shaped[v] += back;
                g_rest_joints[k] -= back;
            }
        }

        let mut g_local = vec![Matrix3::zeros(); nj];
        for &j in template.joint_order().iter().rev() {
            match template.parent(j) {
                None => {
                    g_local[j] += g_rot[j];
                    g_rest_joints[j] += g_t[j];
                }
                Some(p) => {
                    let offset = self.rest_joints[j] - self.rest_joints[p];
                    let rp = self.global_rot[p];
                    let (gr, gt) = (g_rot[j], g_t[j]);
                    g_rot[p] += gr * self.local[j].transpose() + gt * offset.transpose();
                    g_local[j] += rp.transpose() * gr;
                    g_t[p] += gt;
                    let back = rp.transpose() * gt;
                    g_rest_joints[j] += back;
                    g_rest_joints[p] -= back;
                }
            }
        }

        for (j, g) in g_rest_joints.iter().enumerate() {
            for &(v, w) in template.regressor_row(j) {
                g_shaped[v] += g * w;
            }
        }
        let mut beta = [0.0; NUM_BETAS];
        for (k, b) in beta.iter_mut().enumerate() {
            *b = template
                .shape_direction(k)
                .iter()
                .zip(&g_shaped)
                .map(|(d, g)| d.dot(g))
                .sum();
        }
        let theta = self
            .theta
            .iter()
            .zip(&g_local)
            .map(|(w, g)| axis_angle_vjp(w, g))
            .collect();
        PoseShapeGrad { theta, beta }
    }
}

/// Forward kinematics followed by projection, with a reverse pass onto the
/// flattened 85-vector of [`BodyParams`].
#[derive(Clone, Debug)]
pub struct ProjectedBody {
    pub mesh: BodyMesh,
    pub vertices_2d: Vec<Vector2<f64>>,
    pub joints_2d: Vec<Vector2<f64>>,
    params: BodyParams,
    size: ImageSize,
    tape: SkinningTape,
}

/// Gradients flowing into a [`ProjectedBody`]. Empty slices mean zero.
#[derive(Default)]
pub struct BodyGradients<'a> {
    pub vertices_2d: &'a [Vector2<f64>],
    pub joints_2d: &'a [Vector2<f64>],
    pub joints_3d: &'a [Vector3<f64>],
}

impl ProjectedBody {
    pub fn new(template: &MeshTemplate, params: &BodyParams, size: ImageSize) -> Self {
        let (mesh, tape) = forward_with_tape(template, params);
        let cam = params.camera();
        let vertices_2d = project_points(&mesh.vertices, &cam, size);
        let joints_2d = project_points(&mesh.joints, &cam, size);
        Self {
            mesh,
            vertices_2d,
            joints_2d,
            params: params.clone(),
            size,
            tape,
        }
    }

    pub fn params(&self) -> &BodyParams {
        &self.params
    }

    pub fn size(&self) -> ImageSize {
        self.size
    }

    pub fn backward(&self, template: &MeshTemplate, grads: BodyGradients<'_>) -> [f64; PARAM_DIM] {
        let cam = self.params.camera();
        let nv = self.mesh.vertices.len();
        let nj = self.mesh.joints.len();
        let mut g_cam = [0.0; 3];
        let mut gv = vec![Vector3::zeros(); nv];
        let mut gj = vec![Vector3::zeros(); nj];
        if !grads.vertices_2d.is_empty() {
            let (g, c) = project_points_vjp(&self.mesh.vertices, &cam, self.size, grads.vertices_2d);
            gv = g;
            g_cam.iter_mut().zip(c).for_each(|(a, b)| *a += b);
        }
        if !grads.joints_2d.is_empty() {
            let (g, c) = project_points_vjp(&self.mesh.joints, &cam, self.size, grads.joints_2d);
            gj = g;
            g_cam.iter_mut().zip(c).for_each(|(a, b)| *a += b);
        }
        if !grads.joints_3d.is_empty() {
            gj.iter_mut().zip(grads.joints_3d).for_each(|(a, b)| *a += b);
        }
        let ps = self.tape.backward(template, &gv, Some(&gj));
        let mut out = [0.0; PARAM_DIM];
        for (j, g) in ps.theta.iter().enumerate() {
            out[3 * j..3 * j + 3].copy_from_slice(g.as_slice());
        }
        out[BETA_OFFSET..CAMERA_OFFSET].copy_from_slice(&ps.beta);
        out[CAMERA_OFFSET..].copy_from_slice(&g_cam);
        out
    }
}
