//! Single-frame body regressor: strided convolutional encoder, feature layer,
//! optional affine feature modulation and an iterative residual head.

use serde::{Deserialize, Serialize};

use super::ops::{leaky_relu, leaky_relu_backward, linear_backward, linear_forward, ConvShape};
use super::params::{fill_normal, seeded, ParamLayout};
use crate::body::{BodyParams, ImageSize, CAMERA_OFFSET, PARAM_DIM};
use crate::error::{Error, Result};

const SLOPE: f64 = 0.1;
const DEFAULT_SCALE: f64 = 0.9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegressorConfig {
    pub feature_dim: usize,
    pub encoder_widths: Vec<usize>,
    pub iterative_refinement_steps: usize,
    pub head_hidden: usize,
    pub init_seed: u64,
    pub image_height: usize,
    pub image_width: usize,
}

impl Default for RegressorConfig {
    fn default() -> Self {
        Self {
            feature_dim: 2048,
            encoder_widths: vec![16, 32, 64, 64],
            iterative_refinement_steps: 3,
            head_hidden: 256,
            init_seed: 0,
            image_height: 64,
            image_width: 64,
        }
    }
}

impl RegressorConfig {
    pub fn image_size(&self) -> ImageSize {
        ImageSize::new(self.image_height, self.image_width)
    }

    fn validate(&self) -> Result<()> {
        let stride = 1usize << self.encoder_widths.len();
        if self.feature_dim == 0 || self.head_hidden == 0 || self.iterative_refinement_steps == 0 {
            return Err(Error::Config("regressor dimensions must be positive".into()));
        }
        if self.encoder_widths.is_empty() || self.encoder_widths.contains(&0) {
            return Err(Error::Config("encoder needs at least one non-empty stage".into()));
        }
        if !self.image_height.is_multiple_of(stride) || !self.image_width.is_multiple_of(stride) {
            return Err(Error::Config(format!(
                "image size {}x{} is not divisible by the encoder stride {stride}",
                self.image_height, self.image_width
            )));
        }
        Ok(())
    }
}

/// Per-channel scaling and offset applied to encoder features.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextAffine {
    pub gamma: Vec<f64>,
    pub delta: Vec<f64>,
}

impl ContextAffine {
    pub fn identity(dim: usize) -> Self {
        Self {
            gamma: vec![1.0; dim],
            delta: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }
}

/// Gradients with respect to one sample's modulation.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineGrad {
    pub gamma: Vec<f64>,
    pub delta: Vec<f64>,
}

/// Starting point of the iterative head: rest pose, mean shape, centered
/// camera. The scale entry is stored as its logarithm.
pub fn mean_raw_params() -> [f64; PARAM_DIM] {
    let mut raw = [0.0; PARAM_DIM];
    raw[CAMERA_OFFSET] = DEFAULT_SCALE.ln();
    raw
}

/// Maps a raw head output to body parameters (`scale = exp(raw)`).
pub fn raw_to_params(raw: &[f64; PARAM_DIM]) -> Result<BodyParams> {
    let mut v = *raw;
    v[CAMERA_OFFSET] = raw[CAMERA_OFFSET].exp();
    BodyParams::from_slice(&v)
}

/// Chain rule from a gradient on body parameters to one on the raw output.
pub fn params_grad_to_raw(grad: &[f64; PARAM_DIM], raw: &[f64; PARAM_DIM]) -> [f64; PARAM_DIM] {
    let mut g = *grad;
    g[CAMERA_OFFSET] *= raw[CAMERA_OFFSET].exp();
    g
}

#[derive(Clone, Debug)]
struct HeadStep {
    input: Vec<f64>,
    hidden_1: Vec<f64>,
    hidden_2: Vec<f64>,
}

/// Activations recorded by a forward pass, consumed by `Regressor::backward`.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    batch: usize,
    conv_cols: Vec<Vec<f64>>,
    conv_out: Vec<Vec<f64>>,
    flat: Vec<f64>,
    /// Encoder features `f`, `batch × feature_dim`.
    pub features: Vec<f64>,
    gammas: Option<Vec<Vec<f64>>>,
    steps: Vec<HeadStep>,
    /// Raw head outputs, one per sample.
    pub raw: Vec<[f64; PARAM_DIM]>,
}

impl ForwardPass {
    pub fn params(&self) -> Result<Vec<BodyParams>> {
        self.raw.iter().map(raw_to_params).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Regressor {
    config: RegressorConfig,
    layout: ParamLayout,
    convs: Vec<ConvShape>,
    flat_dim: usize,
    pub weights: Vec<f64>,
}

impl Regressor {
    /// Freshly initialized network (He-normal weights, zero biases, a
    /// near-zero final head layer).
    pub fn new(config: RegressorConfig) -> Result<Self> {
        let mut net = Self::empty(config)?;
        let mut rng = seeded(net.config.init_seed);
        for spec in net.layout.entries().to_vec() {
            let std = if spec.name.ends_with(".bias") {
                0.0
            } else if spec.name == "head.out.weight" {
                1e-3
            } else {
                (2.0 / spec.shape[1..].iter().product::<usize>() as f64).sqrt()
            };
            fill_normal(&mut net.weights, spec.range(), std, &mut rng);
        }
        Ok(net)
    }

    /// Network with every weight zero; used when loading checkpoints.
    pub fn empty(config: RegressorConfig) -> Result<Self> {
        config.validate()?;
        let mut layout = ParamLayout::default();
        let mut convs = Vec::new();
        let (mut c, mut h, mut w) = (3, config.image_height, config.image_width);
        for (i, &width) in config.encoder_widths.iter().enumerate() {
            let shape = ConvShape {
                in_channels: c,
                out_channels: width,
                kernel: 3,
                stride: 2,
                pad: 1,
                in_height: h,
                in_width: w,
            };
            layout.push(format!("encoder.conv{i}.weight"), &[width, c * 9]);
            layout.push(format!("encoder.conv{i}.bias"), &[width]);
            c = width;
            h = shape.out_height();
            w = shape.out_width();
            convs.push(shape);
        }
        let flat_dim = c * h * w;
        let f = config.feature_dim;
        let hid = config.head_hidden;
        layout.push("encoder.fc.weight", &[f, flat_dim]);
        layout.push("encoder.fc.bias", &[f]);
        layout.push("head.fc1.weight", &[hid, f + PARAM_DIM]);
        layout.push("head.fc1.bias", &[hid]);
        layout.push("head.fc2.weight", &[hid, hid]);
        layout.push("head.fc2.bias", &[hid]);
        layout.push("head.out.weight", &[PARAM_DIM, hid]);
        layout.push("head.out.bias", &[PARAM_DIM]);
        let weights = vec![0.0; layout.total()];
        Ok(Self {
            config,
            layout,
            convs,
            flat_dim,
            weights,
        })
    }

    pub fn config(&self) -> &RegressorConfig {
        &self.config
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn feature_dim(&self) -> usize {
        self.config.feature_dim
    }

    fn last_channels(&self) -> usize {
        self.convs.last().map_or(3, |c| c.out_channels)
    }

    fn last_plane(&self) -> usize {
        self.convs.last().map_or(0, |c| c.out_height() * c.out_width())
    }

    fn tensor(&self, name: &str) -> &[f64] {
        &self.weights[self.layout.get(name).expect("known tensor").range()]
    }

    fn check_images(&self, images: &[&[f32]]) -> Result<()> {
        let expected = 3 * self.config.image_size().pixels();
        match images.iter().find(|im| im.len() != expected) {
            Some(im) => Err(Error::Length {
                expected,
                actual: im.len(),
            }),
            None => Ok(()),
        }
    }

    /// Runs a batch of HWC images in [0, 1]. With `contexts`, each sample's
    /// features are replaced by `gamma ⊙ f + delta` before the head.
    pub fn forward(&self, images: &[&[f32]], contexts: Option<&[ContextAffine]>) -> Result<ForwardPass> {
        self.check_images(images)?;
        let batch = images.len();
        let f_dim = self.config.feature_dim;
        if let Some(ctx) = contexts {
            if ctx.len() != batch {
                return Err(Error::Config(format!("{} contexts for a batch of {batch}", ctx.len())));
            }
            if let Some(bad) = ctx.iter().find(|c| c.dim() != f_dim || c.delta.len() != f_dim) {
                return Err(Error::Config(format!(
                    "context dimension {} does not match feature_dim {f_dim}",
                    bad.dim()
                )));
            }
        }

        // [3, B, H, W], centered.
        let plane = self.config.image_size().pixels();
        let mut x = vec![0.0; 3 * batch * plane];
        for (b, img) in images.iter().enumerate() {
            for p in 0..plane {
                for ch in 0..3 {
                    x[(ch * batch + b) * plane + p] = img[3 * p + ch] as f64 - 0.5;
                }
            }
        }
        let mut conv_cols = Vec::with_capacity(self.convs.len());
        let mut conv_out = Vec::with_capacity(self.convs.len());
        for (i, shape) in self.convs.iter().enumerate() {
            let (mut y, cols) = shape.forward(
                self.tensor(&format!("encoder.conv{i}.weight")),
                self.tensor(&format!("encoder.conv{i}.bias")),
                &x,
                batch,
            );
            leaky_relu(&mut y, SLOPE);
            conv_cols.push(cols);
            conv_out.push(y.clone());
            x = y;
        }
        let flat = channel_major_to_rows(&x, batch, self.last_channels(), self.last_plane());
        let mut features = linear_forward(
            self.tensor("encoder.fc.weight"),
            self.tensor("encoder.fc.bias"),
            &flat,
            batch,
            self.flat_dim,
            f_dim,
        );
        leaky_relu(&mut features, SLOPE);

        let mut modulated = features.clone();
        if let Some(ctx) = contexts {
            for (b, c) in ctx.iter().enumerate() {
                for (k, m) in modulated[b * f_dim..(b + 1) * f_dim].iter_mut().enumerate() {
                    *m = c.gamma[k] * *m + c.delta[k];
                }
            }
        }
        let (raw, steps) = self.run_head(&modulated, batch);
        Ok(ForwardPass {
            batch,
            conv_cols,
            conv_out,
            flat,
            features,
            gammas: contexts.map(|c| c.iter().map(|a| a.gamma.clone()).collect()),
            steps,
            raw,
        })
    }

    fn run_head(&self, features: &[f64], batch: usize) -> (Vec<[f64; PARAM_DIM]>, Vec<HeadStep>) {
        let f_dim = self.config.feature_dim;
        let hid = self.config.head_hidden;
        let in_dim = f_dim + PARAM_DIM;
        let mut raw = vec![mean_raw_params(); batch];
        let mut steps = Vec::with_capacity(self.config.iterative_refinement_steps);
        for _ in 0..self.config.iterative_refinement_steps {
            let mut input = vec![0.0; batch * in_dim];
            for b in 0..batch {
                input[b * in_dim..b * in_dim + f_dim].copy_from_slice(&features[b * f_dim..(b + 1) * f_dim]);
                input[b * in_dim + f_dim..(b + 1) * in_dim].copy_from_slice(&raw[b]);
            }
            let mut hidden_1 = linear_forward(self.tensor("head.fc1.weight"), self.tensor("head.fc1.bias"), &input, batch, in_dim, hid);
            leaky_relu(&mut hidden_1, SLOPE);
            let mut hidden_2 = linear_forward(self.tensor("head.fc2.weight"), self.tensor("head.fc2.bias"), &hidden_1, batch, hid, hid);
            leaky_relu(&mut hidden_2, SLOPE);
            let delta = linear_forward(self.tensor("head.out.weight"), self.tensor("head.out.bias"), &hidden_2, batch, hid, PARAM_DIM);
            for (b, r) in raw.iter_mut().enumerate() {
                for (k, v) in r.iter_mut().enumerate() {
                    *v += delta[b * PARAM_DIM + k];
                }
            }
            steps.push(HeadStep {
                input,
                hidden_1,
                hidden_2,
            });
        }
        (raw, steps)
    }

    /// Body parameters for a single image.
    pub fn predict(&self, image: &[f32], context: Option<&ContextAffine>) -> Result<BodyParams> {
        let ctx = context.map(std::slice::from_ref);
        let pass = self.forward(&[image], ctx)?;
        raw_to_params(&pass.raw[0])
    }

    /// Encoder features `f` of a single image.
    pub fn features(&self, image: &[f32]) -> Result<Vec<f64>> {
        Ok(self.forward(&[image], None)?.features)
    }

    /// Backpropagates gradients on the raw outputs, accumulating into `grads`
    /// (same layout as `weights`). Returns per-sample modulation gradients
    /// when the pass used contexts. `train_encoder = false` stops at the
    /// features.
    pub fn backward(
        &self,
        pass: &ForwardPass,
        grad_raw: &[[f64; PARAM_DIM]],
        grads: &mut [f64],
        train_encoder: bool,
    ) -> Option<Vec<AffineGrad>> {
        assert_eq!(grads.len(), self.weights.len());
        assert_eq!(grad_raw.len(), pass.batch);
        let batch = pass.batch;
        let f_dim = self.config.feature_dim;
        let hid = self.config.head_hidden;
        let in_dim = f_dim + PARAM_DIM;
        let range = |name: &str| self.layout.get(name).expect("known tensor").range();

        let mut grad_modulated = vec![0.0; batch * f_dim];
        let mut g_raw: Vec<f64> = grad_raw.iter().flatten().copied().collect();
        for step in pass.steps.iter().rev() {
            let (w, b) = split_pair(grads, range("head.out.weight"), range("head.out.bias"));
            let mut g_h2 = linear_backward(self.tensor("head.out.weight"), &step.hidden_2, &g_raw, batch, hid, PARAM_DIM, w, b);
            leaky_relu_backward(&step.hidden_2, &mut g_h2, SLOPE);
            let (w, b) = split_pair(grads, range("head.fc2.weight"), range("head.fc2.bias"));
            let mut g_h1 = linear_backward(self.tensor("head.fc2.weight"), &step.hidden_1, &g_h2, batch, hid, hid, w, b);
            leaky_relu_backward(&step.hidden_1, &mut g_h1, SLOPE);
            let (w, b) = split_pair(grads, range("head.fc1.weight"), range("head.fc1.bias"));
            let g_in = linear_backward(self.tensor("head.fc1.weight"), &step.input, &g_h1, batch, in_dim, hid, w, b);
            for bi in 0..batch {
                let row = &g_in[bi * in_dim..(bi + 1) * in_dim];
                for (g, x) in grad_modulated[bi * f_dim..(bi + 1) * f_dim].iter_mut().zip(&row[..f_dim]) {
                    *g += x;
                }
                for (g, x) in g_raw[bi * PARAM_DIM..(bi + 1) * PARAM_DIM].iter_mut().zip(&row[f_dim..]) {
                    *g += x;
                }
            }
        }

        let mut grad_features = grad_modulated.clone();
        let affine = pass.gammas.as_ref().map(|gammas| {
            (0..batch)
                .map(|b| {
                    let gm = &grad_modulated[b * f_dim..(b + 1) * f_dim];
                    let f = &pass.features[b * f_dim..(b + 1) * f_dim];
                    for (k, g) in grad_features[b * f_dim..(b + 1) * f_dim].iter_mut().enumerate() {
                        *g *= gammas[b][k];
                    }
                    AffineGrad {
                        gamma: gm.iter().zip(f).map(|(g, x)| g * x).collect(),
                        delta: gm.to_vec(),
                    }
                })
                .collect()
        });
        if !train_encoder {
            return affine;
        }

        leaky_relu_backward(&pass.features, &mut grad_features, SLOPE);
        let (w, b) = split_pair(grads, range("encoder.fc.weight"), range("encoder.fc.bias"));
        let g_flat = linear_backward(self.tensor("encoder.fc.weight"), &pass.flat, &grad_features, batch, self.flat_dim, f_dim, w, b);
        let mut g = rows_to_channel_major(&g_flat, batch, self.last_channels(), self.last_plane());
        for (i, shape) in self.convs.iter().enumerate().rev() {
            leaky_relu_backward(&pass.conv_out[i], &mut g, SLOPE);
            let wr = range(&format!("encoder.conv{i}.weight"));
            let br = range(&format!("encoder.conv{i}.bias"));
            let (w, b) = split_pair(grads, wr.clone(), br);
            match shape.backward(&self.weights[wr], &pass.conv_cols[i], &g, batch, w, b, i > 0) {
                Some(next) => g = next,
                None => break,
            }
        }
        affine
    }
}

/// Disjoint mutable views of a weight tensor and its bias (bias follows
/// weight in every layout).
fn split_pair(
    buf: &mut [f64],
    weight: std::ops::Range<usize>,
    bias: std::ops::Range<usize>,
) -> (&mut [f64], &mut [f64]) {
    debug_assert_eq!(weight.end, bias.start);
    let (head, tail) = buf[weight.start..bias.end].split_at_mut(weight.len());
    (head, tail)
}

/// `[C, B, P]` to `[B, C·P]`.
fn channel_major_to_rows(x: &[f64], batch: usize, channels: usize, plane: usize) -> Vec<f64> {
    let flat_dim = channels * plane;
    let mut out = vec![0.0; batch * flat_dim];
    for c in 0..channels {
        for b in 0..batch {
            out[b * flat_dim + c * plane..][..plane].copy_from_slice(&x[(c * batch + b) * plane..][..plane]);
        }
    }
    out
}

/// `[B, C·P]` to `[C, B, P]`.
fn rows_to_channel_major(x: &[f64], batch: usize, channels: usize, plane: usize) -> Vec<f64> {
    let flat_dim = channels * plane;
    let mut out = vec![0.0; batch * flat_dim];
    for c in 0..channels {
        for b in 0..batch {
            out[(c * batch + b) * plane..][..plane].copy_from_slice(&x[b * flat_dim + c * plane..][..plane]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> RegressorConfig {
        RegressorConfig {
            feature_dim: 24,
            encoder_widths: vec![4, 6],
            iterative_refinement_steps: 3,
            head_hidden: 12,
            init_seed: 5,
            image_height: 8,
            image_width: 8,
        }
    }

    fn images(n: usize, seed: u64) -> Vec<Vec<f32>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..192).map(|_| rng.random::<f32>()).collect()).collect()
    }

    fn objective(pass: &ForwardPass, coeffs: &[f64]) -> f64 {
        pass.raw.iter().flatten().zip(coeffs).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn weight_gradients_match_finite_differences() {
        let mut net = Regressor::new(tiny()).unwrap();
        // Larger output layer so every stage carries signal.
        let r = net.layout().get("head.out.weight").unwrap().range();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for w in &mut net.weights[r] {
            *w = rng.random_range(-0.3..0.3);
        }
        let imgs = images(3, 2);
        let refs: Vec<&[f32]> = imgs.iter().map(|v| v.as_slice()).collect();
        let coeffs: Vec<f64> = (0..3 * PARAM_DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
        let pass = net.forward(&refs, None).unwrap();
        let grad_raw: Vec<[f64; PARAM_DIM]> = coeffs.chunks(PARAM_DIM).map(|c| c.try_into().unwrap()).collect();
        let mut grads = vec![0.0; net.weights.len()];
        net.backward(&pass, &grad_raw, &mut grads, true);

        let eps = 1e-6;
        for spec in net.layout().entries().to_vec() {
            for k in 0..6.min(spec.len()) {
                let i = spec.offset + (k * 7919) % spec.len();
                let orig = net.weights[i];
                net.weights[i] = orig + eps;
                let plus = objective(&net.forward(&refs, None).unwrap(), &coeffs);
                net.weights[i] = orig - eps;
                let minus = objective(&net.forward(&refs, None).unwrap(), &coeffs);
                net.weights[i] = orig;
                let numeric = (plus - minus) / (2.0 * eps);
                let err = (numeric - grads[i]).abs() / numeric.abs().max(grads[i].abs()).max(1e-6);
                assert!(err < 1e-5, "{} [{i}]: {numeric} vs {}", spec.name, grads[i]);
            }
        }
    }

    #[test]
    fn modulation_gradients_match_finite_differences() {
        let net = Regressor::new(tiny()).unwrap();
        let imgs = images(2, 3);
        let refs: Vec<&[f32]> = imgs.iter().map(|v| v.as_slice()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ctx: Vec<ContextAffine> = (0..2)
            .map(|_| ContextAffine {
                gamma: (0..24).map(|_| rng.random_range(0.5..1.5)).collect(),
                delta: (0..24).map(|_| rng.random_range(-0.2..0.2)).collect(),
            })
            .collect();
        let coeffs: Vec<f64> = (0..2 * PARAM_DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
        let pass = net.forward(&refs, Some(&ctx)).unwrap();
        let grad_raw: Vec<[f64; PARAM_DIM]> = coeffs.chunks(PARAM_DIM).map(|c| c.try_into().unwrap()).collect();
        let mut grads = vec![0.0; net.weights.len()];
        let affine = net.backward(&pass, &grad_raw, &mut grads, false).unwrap();
        let eps = 1e-6;
        for b in 0..2 {
            for k in [0, 5, 23] {
                for which in 0..2 {
                    let eval = |d: f64| {
                        let mut c = ctx.clone();
                        if which == 0 {
                            c[b].gamma[k] += d;
                        } else {
                            c[b].delta[k] += d;
                        }
                        objective(&net.forward(&refs, Some(&c)).unwrap(), &coeffs)
                    };
                    let (plus, minus) = (eval(eps), eval(-eps));
                    let numeric = (plus - minus) / (2.0 * eps);
                    let analytic = if which == 0 { affine[b].gamma[k] } else { affine[b].delta[k] };
                    assert!((numeric - analytic).abs() <= 1e-6 * numeric.abs().max(1e-3), "{numeric} vs {analytic}");
                }
            }
        }
    }

    #[test]
    fn identity_context_changes_nothing() {
        let net = Regressor::new(tiny()).unwrap();
        let img = &images(1, 9)[0];
        let plain = net.predict(img, None).unwrap();
        let with = net.predict(img, Some(&ContextAffine::identity(24))).unwrap();
        assert_eq!(plain, with);
    }

    #[test]
    fn zero_gamma_substitutes_features() {
        let net = Regressor::new(tiny()).unwrap();
        let imgs = images(2, 10);
        let f_a = net.features(&imgs[0]).unwrap();
        let ctx = ContextAffine {
            gamma: vec![0.0; 24],
            delta: f_a,
        };
        assert_eq!(net.predict(&imgs[1], Some(&ctx)).unwrap(), net.predict(&imgs[0], None).unwrap());
    }

    #[test]
    fn initialization_is_deterministic() {
        let img = &images(1, 11)[0];
        let a = Regressor::new(tiny()).unwrap().predict(img, None).unwrap();
        let b = Regressor::new(tiny()).unwrap().predict(img, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mismatched_context_is_a_configuration_error() {
        let net = Regressor::new(tiny()).unwrap();
        let img = &images(1, 12)[0];
        let err = net.predict(img, Some(&ContextAffine::identity(7))).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn batch_rows_are_independent() {
        let net = Regressor::new(tiny()).unwrap();
        let imgs = images(3, 13);
        let refs: Vec<&[f32]> = imgs.iter().map(|v| v.as_slice()).collect();
        let batched = net.forward(&refs, None).unwrap();
        for (i, img) in imgs.iter().enumerate() {
            let single = net.forward(&[img.as_slice()], None).unwrap();
            for (a, b) in single.raw[0].iter().zip(&batched.raw[i]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scale_is_positive_by_construction() {
        let mut raw = mean_raw_params();
        raw[CAMERA_OFFSET] = -30.0;
        assert!(raw_to_params(&raw).unwrap().camera().scale > 0.0);
    }
}
