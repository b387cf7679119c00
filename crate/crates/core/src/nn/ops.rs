//! Dense kernels over flat `f64` buffers.
//!
//! Activations of convolutional layers are stored channel-major across the
//! batch, `[C, B, H, W]`, so one GEMM covers a whole batch.

/// `c = alpha * a * b + beta * c` for row-major `a: m×k`, `b: k×n`, `c: m×n`,
/// with optional transposition of `a` and `b` as stored.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    a_transposed: bool,
    b: &[f64],
    b_transposed: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_transposed { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_transposed { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above bound every index the strides can reach.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub fn leaky_relu(x: &mut [f64], slope: f64) {
    for v in x {
        if *v < 0.0 {
            *v *= slope;
        }
    }
}

/// Multiplies `grad` by the activation derivative, given the activation output.
pub fn leaky_relu_backward(output: &[f64], grad: &mut [f64], slope: f64) {
    for (g, &y) in grad.iter_mut().zip(output) {
        if y < 0.0 {
            *g *= slope;
        }
    }
}

/// Shape of a strided square-kernel convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvShape {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub in_height: usize,
    pub in_width: usize,
}

impl ConvShape {
    pub fn out_height(&self) -> usize {
        (self.in_height + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn out_width(&self) -> usize {
        (self.in_width + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    pub fn weight_len(&self) -> usize {
        self.out_channels * self.patch_len()
    }

    /// Unfolds `input: [Cin, B, H, W]` into `[Cin·k·k, B·Ho·Wo]`.
    pub fn im2col(&self, input: &[f64], batch: usize) -> Vec<f64> {
        let (ho, wo) = (self.out_height(), self.out_width());
        let cols = batch * ho * wo;
        let mut out = vec![0.0; self.patch_len() * cols];
        let plane = self.in_height * self.in_width;
        for c in 0..self.in_channels {
            for ky in 0..self.kernel {
                for kx in 0..self.kernel {
                    let row = (c * self.kernel + ky) * self.kernel + kx;
                    let dst = &mut out[row * cols..(row + 1) * cols];
                    for b in 0..batch {
                        let src = &input[(c * batch + b) * plane..][..plane];
                        for oy in 0..ho {
                            let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                            if iy < 0 || iy >= self.in_height as isize {
                                continue;
                            }
                            let src_row = &src[iy as usize * self.in_width..][..self.in_width];
                            let dst_row = &mut dst[(b * ho + oy) * wo..][..wo];
                            for (ox, d) in dst_row.iter_mut().enumerate() {
                                let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                                if ix >= 0 && ix < self.in_width as isize {
                                    *d = src_row[ix as usize];
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Adjoint of `im2col`: scatters column gradients back onto the input.
    pub fn col2im(&self, cols_grad: &[f64], batch: usize) -> Vec<f64> {
        let (ho, wo) = (self.out_height(), self.out_width());
        let cols = batch * ho * wo;
        let plane = self.in_height * self.in_width;
        let mut out = vec![0.0; self.in_channels * batch * plane];
        for c in 0..self.in_channels {
            for ky in 0..self.kernel {
                for kx in 0..self.kernel {
                    let row = (c * self.kernel + ky) * self.kernel + kx;
                    let src = &cols_grad[row * cols..(row + 1) * cols];
                    for b in 0..batch {
                        let dst = &mut out[(c * batch + b) * plane..][..plane];
                        for oy in 0..ho {
                            let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                            if iy < 0 || iy >= self.in_height as isize {
                                continue;
                            }
                            let src_row = &src[(b * ho + oy) * wo..][..wo];
                            for (ox, &g) in src_row.iter().enumerate() {
                                let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                                if ix >= 0 && ix < self.in_width as isize {
                                    dst[iy as usize * self.in_width + ix as usize] += g;
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Returns `[Cout, B·Ho·Wo]` and the unfolded input kept for backward.
    pub fn forward(&self, weight: &[f64], bias: &[f64], input: &[f64], batch: usize) -> (Vec<f64>, Vec<f64>) {
        let cols = self.im2col(input, batch);
        let n = batch * self.out_height() * self.out_width();
        let mut out = vec![0.0; self.out_channels * n];
        for (o, row) in out.chunks_mut(n).enumerate() {
            row.fill(bias[o]);
        }
        gemm(self.out_channels, self.patch_len(), n, 1.0, weight, false, &cols, false, 1.0, &mut out);
        (out, cols)
    }

    /// Accumulates weight and bias gradients; returns the input gradient when
    /// `need_input` is set.
    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        weight: &[f64],
        cols: &[f64],
        grad_out: &[f64],
        batch: usize,
        grad_weight: &mut [f64],
        grad_bias: &mut [f64],
        need_input: bool,
    ) -> Option<Vec<f64>> {
        let n = batch * self.out_height() * self.out_width();
        gemm(self.out_channels, n, self.patch_len(), 1.0, grad_out, false, cols, true, 1.0, grad_weight);
        for (o, row) in grad_out.chunks(n).enumerate() {
            grad_bias[o] += row.iter().sum::<f64>();
        }
        need_input.then(|| {
            let mut grad_cols = vec![0.0; self.patch_len() * n];
            gemm(self.patch_len(), self.out_channels, n, 1.0, weight, true, grad_out, false, 0.0, &mut grad_cols);
            self.col2im(&grad_cols, batch)
        })
    }
}

/// `y = x Wᵀ + b` for `x: B×in`, `W: out×in`.
pub fn linear_forward(weight: &[f64], bias: &[f64], input: &[f64], batch: usize, inputs: usize, outputs: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(batch * outputs);
    for _ in 0..batch {
        out.extend_from_slice(bias);
    }
    gemm(batch, inputs, outputs, 1.0, input, false, weight, true, 1.0, &mut out);
    out
}

/// Accumulates parameter gradients and returns the input gradient.
#[allow(clippy::too_many_arguments)]
pub fn linear_backward(
    weight: &[f64],
    input: &[f64],
    grad_out: &[f64],
    batch: usize,
    inputs: usize,
    outputs: usize,
    grad_weight: &mut [f64],
    grad_bias: &mut [f64],
) -> Vec<f64> {
    gemm(outputs, batch, inputs, 1.0, grad_out, true, input, false, 1.0, grad_weight);
    for row in grad_out.chunks(outputs) {
        for (gb, g) in grad_bias.iter_mut().zip(row) {
            *gb += g;
        }
    }
    let mut grad_in = vec![0.0; batch * inputs];
    gemm(batch, outputs, inputs, 1.0, grad_out, false, weight, false, 0.0, &mut grad_in);
    grad_in
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_with_transposes() {
        // a = [[1,2],[3,4]], b = [[5,6],[7,8]]
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [5.0, 6.0, 7.0, 8.0];
        let mut c = [0.0; 4];
        gemm(2, 2, 2, 1.0, &a, false, &b, false, 0.0, &mut c);
        assert_eq!(c, [19.0, 22.0, 43.0, 50.0]);
        gemm(2, 2, 2, 1.0, &a, true, &b, true, 0.0, &mut c);
        // aᵀ bᵀ = (b a)ᵀ
        assert_eq!(c, [23.0, 31.0, 34.0, 46.0]);
    }

    #[test]
    fn conv_matches_direct_loop() {
        let s = ConvShape { in_channels: 2, out_channels: 3, kernel: 3, stride: 2, pad: 1, in_height: 5, in_width: 6 };
        let batch = 2;
        let input: Vec<f64> = (0..2 * batch * 30).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let weight: Vec<f64> = (0..s.weight_len()).map(|i| ((i * 13) % 7) as f64 * 0.1 - 0.3).collect();
        let bias = [0.1, -0.2, 0.3];
        let (out, _) = s.forward(&weight, &bias, &input, batch);
        let (ho, wo) = (s.out_height(), s.out_width());
        assert_eq!((ho, wo), (3, 3));
        for o in 0..3 {
            for b in 0..batch {
                for oy in 0..ho {
                    for ox in 0..wo {
                        let mut acc = bias[o];
                        for c in 0..2 {
                            for ky in 0..3 {
                                for kx in 0..3 {
                                    let iy = (oy * 2 + ky) as isize - 1;
                                    let ix = (ox * 2 + kx) as isize - 1;
                                    if iy < 0 || ix < 0 || iy >= 5 || ix >= 6 {
                                        continue;
                                    }
                                    let x = input[(c * batch + b) * 30 + iy as usize * 6 + ix as usize];
                                    acc += weight[o * 18 + (c * 3 + ky) * 3 + kx] * x;
                                }
                            }
                        }
                        let got = out[o * batch * ho * wo + (b * ho + oy) * wo + ox];
                        assert!((got - acc).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        let s = ConvShape { in_channels: 2, out_channels: 1, kernel: 3, stride: 2, pad: 1, in_height: 7, in_width: 4 };
        let x: Vec<f64> = (0..2 * 3 * 28).map(|i| (i as f64 * 0.37).sin()).collect();
        let cols = s.im2col(&x, 3);
        let y: Vec<f64> = (0..cols.len()).map(|i| (i as f64 * 0.11).cos()).collect();
        let lhs: f64 = cols.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = s.col2im(&y, 3).iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }
}
