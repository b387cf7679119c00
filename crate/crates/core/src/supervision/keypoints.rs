use nalgebra::Vector2;

/// Confidence-weighted mean distance between projected model joints and
/// reference 2D keypoints.
#[derive(Clone, Debug, PartialEq)]
pub struct KeypointLoss {
    pub loss: f64,
    pub grad: Vec<Vector2<f64>>,
    /// Every confidence was zero.
    pub empty: bool,
}

pub fn keypoint_2d_loss(pred: &[Vector2<f64>], reference: &[Vector2<f64>], confidence: &[f64]) -> KeypointLoss {
    let total: f64 = confidence.iter().sum();
    let mut grad = vec![Vector2::zeros(); pred.len()];
    if total <= 0.0 {
        return KeypointLoss { loss: 0.0, grad, empty: true };
    }
    let mut loss = 0.0;
    for (j, ((p, r), &c)) in pred.iter().zip(reference).zip(confidence).enumerate() {
        if c == 0.0 {
            continue;
        }
        let d = p - r;
        let n = d.norm();
        loss += c * n;
        if n > 0.0 {
            grad[j] = d * (c / (n * total));
        }
    }
    KeypointLoss { loss: loss / total, grad, empty: false }
}
