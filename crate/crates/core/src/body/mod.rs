//! Articulated body model: parameters, template, skinning and the
//! weak-perspective camera.

pub mod camera;
pub mod humanoid;
pub mod model;
pub mod params;
pub mod rotation;
pub mod template;

pub use camera::{project_point, project_points, project_points_vjp, ImageSize};
pub use model::{forward, forward_with_tape, BodyGradients, BodyMesh, PoseShapeGrad, ProjectedBody, SkinningTape};
pub use params::{BodyParams, CameraParams, BETA_OFFSET, CAMERA_OFFSET, NUM_BETAS, NUM_JOINTS, PARAM_DIM};
pub use template::MeshTemplate;
