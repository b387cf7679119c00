//! Axis-angle rotations and their vector-Jacobian product.
//!
//! R(w) = I + A(t) K + B(t) K^2 with K = [w]x and t = |w|. The coefficient
//! functions switch to Taylor series near the identity so both the map and its
//! derivative stay accurate at w = 0.

use nalgebra::{Matrix3, Vector3};
use std::f64::consts::TAU;

const SERIES_LIMIT: f64 = 1e-2;

struct Coefficients {
    a: f64,
    b: f64,
    /// A'(t) / t
    da: f64,
    /// B'(t) / t
    db: f64,
}

fn coefficients(angle: f64) -> Coefficients {
    let t2 = angle * angle;
    if angle < SERIES_LIMIT {
        Coefficients {
            a: 1.0 - t2 / 6.0 + t2 * t2 / 120.0,
            b: 0.5 - t2 / 24.0 + t2 * t2 / 720.0,
            da: -1.0 / 3.0 + t2 / 30.0 - t2 * t2 / 840.0,
            db: -1.0 / 12.0 + t2 / 180.0 - t2 * t2 / 6720.0,
        }
    } else {
        let (s, c) = angle.sin_cos();
        Coefficients {
            a: s / angle,
            b: (1.0 - c) / t2,
            da: (angle * c - s) / (t2 * angle),
            db: (angle * s - 2.0 * (1.0 - c)) / (t2 * t2),
        }
    }
}

pub fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Inner products of `m` with the three skew generators.
fn vee_inner(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        m[(2, 1)] - m[(1, 2)],
        m[(0, 2)] - m[(2, 0)],
        m[(1, 0)] - m[(0, 1)],
    )
}

pub fn axis_angle_to_matrix(w: &Vector3<f64>) -> Matrix3<f64> {
    let c = coefficients(w.norm());
    let k = skew(w);
    Matrix3::identity() + k * c.a + k * k * c.b
}

/// Gradient of `<grad, R(w)>` with respect to `w`.
pub fn axis_angle_vjp(w: &Vector3<f64>, grad: &Matrix3<f64>) -> Vector3<f64> {
    let c = coefficients(w.norm());
    let k = skew(w);
    let kt = k.transpose();
    let k2 = k * k;
    let radial = c.da * grad.dot(&k) + c.db * grad.dot(&k2);
    vee_inner(grad) * c.a + vee_inner(&(grad * kt + kt * grad)) * c.b + w * radial
}

/// Maps an axis-angle vector to an equivalent one with norm below 2π.
pub fn canonicalize(w: Vector3<f64>) -> Vector3<f64> {
    let angle = w.norm();
    if angle < TAU {
        return w;
    }
    let wrapped = angle.rem_euclid(TAU);
    w * (wrapped / angle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, Unit};

    #[test]
    fn matches_nalgebra_rotation() {
        for w in [
            Vector3::new(0.3, -0.2, 0.9),
            Vector3::new(1e-4, 2e-4, -3e-4),
            Vector3::new(0.0, 3.0, 0.0),
        ] {
            let ours = axis_angle_to_matrix(&w);
            let reference = Rotation3::from_scaled_axis(w);
            assert!((ours - reference.matrix()).abs().max() < 1e-12);
        }
        assert_eq!(axis_angle_to_matrix(&Vector3::zeros()), Matrix3::identity());
    }

    #[test]
    fn vjp_matches_central_differences() {
        let grad = Matrix3::new(0.3, -1.0, 0.2, 0.7, 0.1, -0.4, 0.5, 0.9, -0.6);
        for w in [
            Vector3::new(0.4, -0.7, 0.2),
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(3e-3, -1e-3, 2e-3),
            Vector3::new(2.9, 0.5, -1.0),
        ] {
            let analytic = axis_angle_vjp(&w, &grad);
            for i in 0..3 {
                let h = 1e-6;
                let mut wp = w;
                let mut wm = w;
                wp[i] += h;
                wm[i] -= h;
                let fd = (grad.dot(&axis_angle_to_matrix(&wp)) - grad.dot(&axis_angle_to_matrix(&wm)))
                    / (2.0 * h);
                assert!((fd - analytic[i]).abs() < 1e-8, "{w:?} axis {i}: {fd} vs {}", analytic[i]);
            }
        }
    }

    #[test]
    fn canonicalization_preserves_rotation() {
        let axis = Unit::new_normalize(Vector3::new(1.0, 2.0, -0.5));
        let w = axis.into_inner() * (TAU + 0.8);
        let c = canonicalize(w);
        assert!(c.norm() < TAU);
        assert!((axis_angle_to_matrix(&w) - axis_angle_to_matrix(&c)).abs().max() < 1e-12);
    }
}
