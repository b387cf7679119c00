//! Weak-perspective projection into pixel coordinates.
//!
//! A point maps to `((s * (x + tx)) + 1) / 2 * W` horizontally and the same
//! with `y`, `ty`, `H` vertically: the normalized square [-1, 1]^2 covers the
//! image, y points down, and depth is ignored. Pixel centers sit at half
//! integers.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::params::CameraParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageSize {
    pub height: usize,
    pub width: usize,
}

impl ImageSize {
    pub const fn new(height: usize, width: usize) -> Self {
        Self { height, width }
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    /// True when `p` lies in `[0, W) x [0, H)`.
    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x < self.width as f64 && p.y < self.height as f64
    }

    /// Pixels per normalized unit along x and y.
    pub fn half_extent(&self) -> Vector2<f64> {
        Vector2::new(self.width as f64 / 2.0, self.height as f64 / 2.0)
    }
}

pub fn project_point(p: &Vector3<f64>, cam: &CameraParams, size: ImageSize) -> Vector2<f64> {
    let h = size.half_extent();
    Vector2::new(
        (cam.scale * (p.x + cam.tx) + 1.0) * h.x,
        (cam.scale * (p.y + cam.ty) + 1.0) * h.y,
    )
}

pub fn project_points(points: &[Vector3<f64>], cam: &CameraParams, size: ImageSize) -> Vec<Vector2<f64>> {
    points.iter().map(|p| project_point(p, cam, size)).collect()
}

/// Pullback of pixel-space gradients onto the 3D points and the camera
/// `(scale, tx, ty)`.
pub fn project_points_vjp(
    points: &[Vector3<f64>],
    cam: &CameraParams,
    size: ImageSize,
    grad: &[Vector2<f64>],
) -> (Vec<Vector3<f64>>, [f64; 3]) {
    let h = size.half_extent();
    let mut grad_cam = [0.0; 3];
    let grad_points = points
        .iter()
        .zip(grad)
        .map(|(p, g)| {
            let gx = g.x * h.x;
            let gy = g.y * h.y;
            grad_cam[0] += gx * (p.x + cam.tx) + gy * (p.y + cam.ty);
            grad_cam[1] += gx * cam.scale;
            grad_cam[2] += gy * cam.scale;
            Vector3::new(gx * cam.scale, gy * cam.scale, 0.0)
        })
        .collect();
    (grad_points, grad_cam)
}
