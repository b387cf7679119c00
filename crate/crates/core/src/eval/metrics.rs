//! Procrustes-aligned joint error and acceleration error.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Similarity transform `x ↦ s·R·x + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Similarity {
    pub rotation: Matrix3<f64>,
    pub scale: f64,
    pub translation: Vector3<f64>,
}

impl Similarity {
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p * self.scale + self.translation
    }
}

fn centroid(points: &[Vector3<f64>]) -> Vector3<f64> {
    points.iter().sum::<Vector3<f64>>() / points.len() as f64
}

/// Least-squares similarity mapping `source` onto `target` without
/// reflections.
pub fn procrustes(source: &[Vector3<f64>], target: &[Vector3<f64>]) -> Result<Similarity> {
    if source.len() != target.len() {
        return Err(Error::Length {
            expected: target.len(),
            actual: source.len(),
        });
    }
    if target.len() < 3 {
        return Err(Error::Degenerate(format!("need at least 3 joints, got {}", target.len())));
    }
    let (mu_s, mu_t) = (centroid(source), centroid(target));
    let n = source.len() as f64;
    let mut cov = Matrix3::zeros();
    let mut var_s = 0.0;
    for (s, t) in source.iter().zip(target) {
        cov += (t - mu_t) * (s - mu_s).transpose();
        var_s += (s - mu_s).norm_squared();
    }
    cov /= n;
    var_s /= n;
    let spread = target.iter().map(|t| (t - mu_t).norm_squared()).sum::<f64>() / n;
    let target_cov = target
        .iter()
        .fold(Matrix3::zeros(), |acc, t| acc + (t - mu_t) * (t - mu_t).transpose())
        / n;
    let sv = target_cov.symmetric_eigenvalues();
    let mut sorted = [sv[0], sv[1], sv[2]];
    sorted.sort_by(|a, b| b.total_cmp(a));
    if spread <= 0.0 || sorted[1] <= 1e-12 * sorted[0].max(f64::MIN_POSITIVE) {
        return Err(Error::Degenerate("ground-truth joints are collinear".into()));
    }
    if var_s <= 1e-18 * spread {
        return Err(Error::Degenerate("predicted joints have zero spread".into()));
    }
    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let rotation = u * d * v_t;
    let trace = (Matrix3::from_diagonal(&svd.singular_values) * d).trace();
    let scale = trace / var_s;
    let translation = mu_t - rotation * mu_s * scale;
    Ok(Similarity {
        rotation,
        scale,
        translation,
    })
}

/// Mean per-joint distance after optimal similarity alignment of `pred` to
/// `gt`, in the units of the inputs.
pub fn pmpjpe(pred: &[Vector3<f64>], gt: &[Vector3<f64>]) -> Result<f64> {
    let sim = procrustes(pred, gt)?;
    Ok(pred.iter().zip(gt).map(|(p, g)| (sim.apply(p) - g).norm()).sum::<f64>() / gt.len() as f64)
}

/// Mean per-joint distance without alignment.
pub fn mpjpe(pred: &[Vector3<f64>], gt: &[Vector3<f64>]) -> f64 {
    pred.iter().zip(gt).map(|(p, g)| (p - g).norm()).sum::<f64>() / gt.len() as f64
}

/// Mean norm of the difference between predicted and true accelerations,
/// with accelerations as second differences scaled by `fps²`.
pub fn acceleration_error(pred: &[Vec<Vector3<f64>>], gt: &[Vec<Vector3<f64>>], fps: f64) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::Length {
            expected: gt.len(),
            actual: pred.len(),
        });
    }
    if gt.len() < 3 {
        return Err(Error::Data(format!("acceleration needs at least 3 frames, got {}", gt.len())));
    }
    if !(fps > 0.0) {
        return Err(Error::Config(format!("fps must be positive, got {fps}")));
    }
    let fps2 = fps * fps;
    let mut total = 0.0;
    let mut count = 0usize;
    for t in 1..gt.len() - 1 {
        let joints = gt[t].len();
        if [&pred[t - 1], &pred[t], &pred[t + 1], &gt[t - 1], &gt[t + 1]].iter().any(|f| f.len() != joints) {
            return Err(Error::Data(format!("joint count changes around frame {t}")));
        }
        for j in 0..joints {
            let a_pred = pred[t + 1][j] - pred[t][j] * 2.0 + pred[t - 1][j];
            let a_gt = gt[t + 1][j] - gt[t][j] * 2.0 + gt[t - 1][j];
            total += ((a_pred - a_gt) * fps2).norm();
            count += 1;
        }
    }
    Ok(total / count as f64)
}
