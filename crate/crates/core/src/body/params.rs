use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::rotation::canonicalize;
use crate::{Error, Result};

pub const NUM_JOINTS: usize = 24;
pub const NUM_BETAS: usize = 10;
/// Flattened length of [`BodyParams`]: 24 x 3 pose, 10 shape, 3 camera.
pub const PARAM_DIM: usize = NUM_JOINTS * 3 + NUM_BETAS + 3;
pub const BETA_OFFSET: usize = NUM_JOINTS * 3;
pub const CAMERA_OFFSET: usize = BETA_OFFSET + NUM_BETAS;

/// Weak-perspective camera: uniform scale followed by a 2D translation in
/// normalized image units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraParams {
    pub scale: f64,
    pub tx: f64,
    pub ty: f64,
}

impl CameraParams {
    pub fn new(scale: f64, tx: f64, ty: f64) -> Result<Self> {
        for (name, v) in [("camera.scale", scale), ("camera.tx", tx), ("camera.ty", ty)] {
            if !v.is_finite() {
                return Err(Error::NonFiniteParam { field: name.into() });
            }
        }
        if scale <= 0.0 {
            return Err(Error::NonPositiveScale(scale));
        }
        Ok(Self { scale, tx, ty })
    }
}

impl Default for CameraParams {
    fn default() -> Self {
        Self {
            scale: 0.9,
            tx: 0.0,
            ty: 0.0,
        }
    }
}

/// Pose (per-joint axis-angle), shape coefficients and camera.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyParams {
    theta: Vec<[f64; 3]>,
    beta: [f64; NUM_BETAS],
    camera: CameraParams,
}

impl BodyParams {
    pub fn new(theta: &[[f64; 3]], beta: [f64; NUM_BETAS], camera: CameraParams) -> Result<Self> {
        if theta.len() != NUM_JOINTS {
            return Err(Error::Length {
                expected: NUM_JOINTS,
                actual: theta.len(),
            });
        }
        for (j, w) in theta.iter().enumerate() {
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteParam {
                    field: format!("theta[{j}]"),
                });
            }
        }
        for (k, b) in beta.iter().enumerate() {
            if !b.is_finite() {
                return Err(Error::NonFiniteParam {
                    field: format!("beta[{k}]"),
                });
            }
        }
        let camera = CameraParams::new(camera.scale, camera.tx, camera.ty)?;
        let theta = theta
            .iter()
            .map(|w| {
                let c = canonicalize(Vector3::from(*w));
                [c.x, c.y, c.z]
            })
            .collect();
        Ok(Self {
            theta,
            beta,
            camera,
        })
    }

    /// Zero pose and shape seen through `camera`.
    pub fn rest(camera: CameraParams) -> Self {
        Self {
            theta: vec![[0.0; 3]; NUM_JOINTS],
            beta: [0.0; NUM_BETAS],
            camera,
        }
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        if values.len() != PARAM_DIM {
            return Err(Error::Length {
                expected: PARAM_DIM,
                actual: values.len(),
            });
        }
        let theta: Vec<[f64; 3]> = values[..BETA_OFFSET]
            .chunks_exact(3)
            .map(|c| [c[0], c[1], c[2]])
            .collect();
        let mut beta = [0.0; NUM_BETAS];
        beta.copy_from_slice(&values[BETA_OFFSET..CAMERA_OFFSET]);
        let c = &values[CAMERA_OFFSET..];
        Self::new(
            &theta,
            beta,
            CameraParams {
                scale: c[0],
                tx: c[1],
                ty: c[2],
            },
        )
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(PARAM_DIM);
        for w in &self.theta {
            out.extend_from_slice(w);
        }
        out.extend_from_slice(&self.beta);
        out.extend_from_slice(&[self.camera.scale, self.camera.tx, self.camera.ty]);
        out
    }

    pub fn theta(&self) -> &[[f64; 3]] {
        &self.theta
    }

    pub fn joint_rotation(&self, joint: usize) -> Vector3<f64> {
        Vector3::from(self.theta[joint])
    }

    pub fn beta(&self) -> &[f64; NUM_BETAS] {
        &self.beta
    }

    pub fn camera(&self) -> CameraParams {
        self.camera
    }

    pub fn with_camera(&self, camera: CameraParams) -> Result<Self> {
        Self::new(&self.theta, self.beta, camera)
    }
}
