//! Central finite differences, used as the reference for every hand-written
//! reverse pass.

use crate::{Error, Result};

/// Output of a function under finite differencing. Only single values are
/// accepted.
pub trait ScalarOutput {
    fn scalar(&self) -> Result<f64>;
}

impl ScalarOutput for f64 {
    fn scalar(&self) -> Result<f64> {
        Ok(*self)
    }
}

impl ScalarOutput for Vec<f64> {
    fn scalar(&self) -> Result<f64> {
        self.as_slice().scalar()
    }
}

impl ScalarOutput for &[f64] {
    fn scalar(&self) -> Result<f64> {
        match self {
            [x] => Ok(*x),
            other => Err(Error::NonScalar(other.len())),
        }
    }
}

impl<const N: usize> ScalarOutput for [f64; N] {
    fn scalar(&self) -> Result<f64> {
        self.as_slice().scalar()
    }
}

/// Central-difference gradient of `op` at `params` with step `eps` in
/// `[1e-7, 1e-3]`.
pub fn finite_difference_gradient<F, O>(mut op: F, params: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> O,
    O: ScalarOutput,
{
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::StepSize(eps));
    }
    let mut x = params.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + eps;
        let plus = op(&x).scalar()?;
        x[i] = orig - eps;
        let minus = op(&x).scalar()?;
        x[i] = orig;
        grad.push((plus - minus) / (2.0 * eps));
    }
    Ok(grad)
}

/// Componentwise relative error `|a - b| / max(|a|, |b|, floor)`, maximized
/// over the vectors.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(floor))
        .fold(0.0, f64::max)
}
