//! Dense flow fields, bilinear sampling and the flow file format.
//!
//! File layout: `FFLO`, H and W as little-endian u32, then the f32 dx plane,
//! the f32 dy plane and the u8 valid plane, all row-major. Externally
//! computed flow is ingested through the same reader.

use nalgebra::{Matrix2, Vector2};
use std::io::{Read, Write};
use std::path::Path;

use crate::body::ImageSize;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"FFLO";

/// Smallest total bilinear weight of valid neighbours for a usable sample.
pub const MIN_VALID_WEIGHT: f64 = 0.25;

/// Per-pixel displacement in pixels plus a validity plane.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowMap {
    size: ImageSize,
    dx: Vec<f32>,
    dy: Vec<f32>,
    valid: Vec<u8>,
}

impl FlowMap {
    pub fn new(size: ImageSize, dx: Vec<f32>, dy: Vec<f32>, valid: Vec<u8>) -> Result<Self> {
        let n = size.pixels();
        if dx.len() != n || dy.len() != n || valid.len() != n {
            return Err(Error::format("flow map", "plane sizes do not match H x W"));
        }
        let bad = (0..n).find(|&i| valid[i] != 0 && !(dx[i].is_finite() && dy[i].is_finite()));
        if let Some(i) = bad {
            return Err(Error::format("flow map", format!("non-finite flow at valid pixel {i}")));
        }
        Ok(Self { size, dx, dy, valid })
    }

    pub fn zeros(size: ImageSize) -> Self {
        Self::constant(size, Vector2::zeros())
    }

    /// Uniform flow, valid everywhere.
    pub fn constant(size: ImageSize, v: Vector2<f64>) -> Self {
        let n = size.pixels();
        Self {
            size,
            dx: vec![v.x as f32; n],
            dy: vec![v.y as f32; n],
            valid: vec![1; n],
        }
    }

    pub fn size(&self) -> ImageSize {
        self.size
    }

    pub fn at(&self, row: usize, col: usize) -> Vector2<f64> {
        let i = row * self.size.width + col;
        Vector2::new(self.dx[i] as f64, self.dy[i] as f64)
    }

    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.valid[row * self.size.width + col] != 0
    }

    pub fn valid_plane(&self) -> &[u8] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v != 0).count()
    }

    /// Bilinear sample at continuous image coordinates (pixel centers at half
    /// integers), with the weights restricted to valid pixels and
    /// renormalized. `None` outside the grid of pixel centers or when the
    /// valid neighbours carry less than [`MIN_VALID_WEIGHT`].
    pub fn sample(&self, p: &Vector2<f64>) -> Option<Vector2<f64>> {
        self.sample_with_jacobian(p).map(|(v, _)| v)
    }

    /// Valid-weighted bilinear sample and its derivative with respect to the
    /// location.
    pub fn sample_with_jacobian(&self, p: &Vector2<f64>) -> Option<(Vector2<f64>, Matrix2<f64>)> {
        let (w, h) = (self.size.width, self.size.height);
        let fx = p.x - 0.5;
        let fy = p.y - 0.5;
        if !(fx >= 0.0 && fy >= 0.0 && fx <= (w - 1) as f64 && fy <= (h - 1) as f64) {
            return None;
        }
        let x0 = (fx.floor() as usize).min(w.saturating_sub(2));
        let y0 = (fy.floor() as usize).min(h.saturating_sub(2));
        let x1 = (x0 + 1).min(w - 1);
        let y1 = (y0 + 1).min(h - 1);
        let ax = fx - x0 as f64;
        let ay = fy - y0 as f64;
        // (row, col, weight, d weight / dx, d weight / dy)
        let corners = [
            (y0, x0, (1.0 - ax) * (1.0 - ay), -(1.0 - ay), -(1.0 - ax)),
            (y0, x1, ax * (1.0 - ay), 1.0 - ay, -ax),
            (y1, x0, (1.0 - ax) * ay, -ay, 1.0 - ax),
            (y1, x1, ax * ay, ay, ax),
        ];
        let (mut total, mut d_total) = (0.0, Vector2::zeros());
        let (mut sum, mut d_sum_dx, mut d_sum_dy) = (Vector2::zeros(), Vector2::zeros(), Vector2::zeros());
        for &(r, c, wt, dwx, dwy) in &corners {
            if !self.is_valid(r, c) {
                continue;
            }
            let v = self.at(r, c);
            total += wt;
            d_total += Vector2::new(dwx, dwy);
            sum += v * wt;
            d_sum_dx += v * dwx;
            d_sum_dy += v * dwy;
        }
        if total < MIN_VALID_WEIGHT {
            return None;
        }
        let value = sum / total;
        let d_dx = (d_sum_dx - value * d_total.x) / total;
        let d_dy = (d_sum_dy - value * d_total.y) / total;
        Some((value, Matrix2::from_columns(&[d_dx, d_dy])))
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&(self.size.height as u32).to_le_bytes())?;
        out.write_all(&(self.size.width as u32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.size.pixels() * 9);
        for plane in [&self.dx, &self.dy] {
            plane.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
        }
        buf.extend_from_slice(&self.valid);
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut header = [0u8; 12];
        input.read_exact(&mut header)?;
        if &header[..4] != MAGIC {
            return Err(Error::format("flow file", "missing FFLO magic"));
        }
        let h = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let w = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let n = h * w;
        let mut body = Vec::new();
        input.read_to_end(&mut body)?;
        if body.len() != n * 9 {
            return Err(Error::format("flow file", format!("expected {} payload bytes, found {}", n * 9, body.len())));
        }
        let plane = |k: usize| -> Vec<f32> {
            body[k * 4 * n..(k + 1) * 4 * n]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect()
        };
        let (dx, dy) = (plane(0), plane(1));
        let valid = body[8 * n..].to_vec();
        Self::new(ImageSize::new(h, w), dx, dy, valid)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(size: ImageSize) -> FlowMap {
        let n = size.pixels();
        let dx = (0..n).map(|i| (i % size.width) as f32 * 0.5).collect();
        let dy = (0..n).map(|i| (i / size.width) as f32 * -0.25).collect();
        FlowMap::new(size, dx, dy, vec![1; n]).unwrap()
    }

    #[test]
    fn bilinear_sampling_reproduces_linear_fields() {
        let f = ramp(ImageSize::new(8, 10));
        let (v, jac) = f.sample_with_jacobian(&Vector2::new(3.3, 4.9)).unwrap();
        assert!((v.x - 2.8 * 0.5).abs() < 1e-6);
        assert!((v.y + 4.4 * 0.25).abs() < 1e-6);
        assert!((jac[(0, 0)] - 0.5).abs() < 1e-9 && (jac[(1, 1)] + 0.25).abs() < 1e-9);
        assert_eq!(f.sample(&Vector2::new(0.5, 0.5)), Some(Vector2::zeros()));
        assert!(f.sample(&Vector2::new(9.5, 7.5)).is_some());
    }

    #[test]
    fn invalid_pixels_do_not_enter_the_sample() {
        let size = ImageSize::new(4, 4);
        let n = size.pixels();
        let mut valid = vec![1; n];
        let mut dx = vec![2.0f32; n];
        for col in 2..4 {
            for row in 0..4 {
                valid[row * 4 + col] = 0;
                dx[row * 4 + col] = 0.0;
            }
        }
        let f = FlowMap::new(size, dx, vec![0.0; n], valid).unwrap();
        let (v, jac) = f.sample_with_jacobian(&Vector2::new(2.2, 1.7)).unwrap();
        assert!((v.x - 2.0).abs() < 1e-12 && jac.norm() < 1e-12);
        // Mostly-invalid neighbourhoods are unusable.
        assert!(f.sample(&Vector2::new(2.4, 1.7)).is_none());
    }

    #[test]
    fn partial_validity_jacobian_matches_differences() {
        let mut f = ramp(ImageSize::new(6, 6));
        f.valid[2 * 6 + 3] = 0;
        let p = Vector2::new(3.2, 2.9);
        let (_, jac) = f.sample_with_jacobian(&p).unwrap();
        let h = 1e-6;
        for k in 0..2 {
            let mut e = Vector2::zeros();
            e[k] = h;
            let numeric = (f.sample(&(p + e)).unwrap() - f.sample(&(p - e)).unwrap()) / (2.0 * h);
            assert!((numeric - jac.column(k)).norm() < 1e-6, "{numeric:?} {jac:?}");
        }
    }

    #[test]
    fn out_of_bounds_samples_are_rejected() {
        let f = ramp(ImageSize::new(8, 10));
        for p in [Vector2::new(0.2, 3.0), Vector2::new(9.7, 3.0), Vector2::new(4.0, -1.0), Vector2::new(4.0, 7.6)] {
            assert!(f.sample(&p).is_none(), "{p:?}");
        }
    }

    #[test]
    fn file_round_trip_is_bit_exact() {
        let mut f = ramp(ImageSize::new(5, 7));
        f.valid[3] = 0;
        let mut buf = Vec::new();
        f.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 12 + 35 * 9);
        assert_eq!(FlowMap::read_from(buf.as_slice()).unwrap(), f);
        assert!(FlowMap::read_from(&buf[..buf.len() - 1]).is_err());
    }
}
