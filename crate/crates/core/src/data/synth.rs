//! Procedural motion sequences rendered with exact flow.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, LabelStore, Sequence};
use crate::body::{BodyParams, CameraParams, ImageSize, MeshTemplate, NUM_BETAS, NUM_JOINTS};
use crate::error::{Error, Result};
use crate::parallel::map_indexed;
use crate::render::{flow_between, render_scene, Appearance, PosedScene, RenderSettings};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotionConfig {
    pub num_sequences: usize,
    pub frames_per_sequence: usize,
    pub image_height: usize,
    pub image_width: usize,
    pub fps: f64,
    /// Per-sequence speed multipliers are drawn log-uniformly from this range.
    pub speed_min: f64,
    pub speed_max: f64,
    /// Scales every joint oscillation amplitude.
    pub amplitude: f64,
    pub shape_spread: f64,
    /// Maximum per-frame camera translation drift, normalized units.
    pub camera_drift: f64,
    /// Fraction of frames whose labels are kept.
    pub labeled_fraction: f64,
    pub seed: u64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            num_sequences: 10,
            frames_per_sequence: 60,
            image_height: 64,
            image_width: 64,
            fps: 30.0,
            speed_min: 0.6,
            speed_max: 1.6,
            amplitude: 1.4,
            shape_spread: 0.8,
            camera_drift: 0.002,
            labeled_fraction: 1.0,
            seed: 0,
        }
    }
}

impl MotionConfig {
    pub fn image_size(&self) -> ImageSize {
        ImageSize::new(self.image_height, self.image_width)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_sequences == 0 || self.frames_per_sequence < 2 {
            return Err(Error::Config("need at least one sequence of two frames".into()));
        }
        if !(self.fps > 0.0) {
            return Err(Error::Config(format!("fps must be positive, got {}", self.fps)));
        }
        if !(self.speed_min > 0.0 && self.speed_max >= self.speed_min) {
            return Err(Error::Config("speed range must be positive and ordered".into()));
        }
        if !(self.labeled_fraction > 0.0 && self.labeled_fraction <= 1.0) {
            return Err(Error::Config(format!("labeled_fraction {} outside (0, 1]", self.labeled_fraction)));
        }
        if self.image_height == 0 || self.image_width == 0 {
            return Err(Error::Config("image size must be positive".into()));
        }
        Ok(())
    }
}

/// One oscillating rotation component.
#[derive(Clone, Copy, Debug)]
struct Oscillator {
    joint: usize,
    axis: usize,
    base: f64,
    amplitude: f64,
    frequency: f64,
    phase: f64,
}

/// `(joint, axis, base range, amplitude)` of every animated component.
const DOFS: [(usize, usize, (f64, f64), f64); 16] = [
    (0, 1, (-0.6, 0.6), 0.35),
    (1, 0, (-0.1, 0.1), 0.55),
    (2, 0, (-0.1, 0.1), 0.55),
    (1, 2, (0.0, 0.15), 0.15),
    (2, 2, (-0.15, 0.0), 0.15),
    (4, 0, (0.1, 0.4), 0.35),
    (5, 0, (0.1, 0.4), 0.35),
    (3, 0, (-0.1, 0.1), 0.12),
    (6, 2, (-0.1, 0.1), 0.1),
    (16, 2, (0.5, 1.1), 0.45),
    (17, 2, (-1.1, -0.5), 0.45),
    (16, 1, (-0.3, 0.3), 0.3),
    (17, 1, (-0.3, 0.3), 0.3),
    (18, 1, (0.0, 0.6), 0.45),
    (19, 1, (-0.6, 0.0), 0.45),
    (15, 1, (-0.2, 0.2), 0.2),
];

/// Ground-truth trajectory of one sequence.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub params: Vec<BodyParams>,
    pub appearance_seed: u64,
}

fn sequence_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (index as u64).wrapping_add(1).wrapping_mul(0xd1b5_4a32_d192_ed03))
}

/// Samples the body trajectory of sequence `index`.
pub fn trajectory(config: &MotionConfig, index: usize) -> Trajectory {
    let mut rng = sequence_rng(config.seed, index);
    let speed = (config.speed_min.ln() + rng.random::<f64>() * (config.speed_max / config.speed_min).ln()).exp();
    let gait = speed * rng.random_range(1.5..2.5);
    let oscillators: Vec<Oscillator> = DOFS
        .iter()
        .map(|&(joint, axis, (lo, hi), amp)| Oscillator {
            joint,
            axis,
            base: rng.random_range(lo..=hi),
            amplitude: amp * config.amplitude * rng.random_range(0.6..1.0),
            frequency: gait * rng.random_range(0.8..1.25),
            phase: rng.random_range(0.0..std::f64::consts::TAU),
        })
        .collect();
    let beta = [0.0; NUM_BETAS].map(|_: f64| rng.random_range(-1.0..=1.0) * config.shape_spread);
    let scale = rng.random_range(0.75..0.95);
    let (mut tx, mut ty) = (rng.random_range(-0.08..0.08), rng.random_range(-0.1..0.06));
    let drift = (
        rng.random_range(-1.0..=1.0) * config.camera_drift,
        rng.random_range(-1.0..=1.0) * config.camera_drift,
    );
    let appearance_seed = rng.random();
    let params = (0..config.frames_per_sequence)
        .map(|t| {
            let time = t as f64 / config.fps;
            let mut theta = vec![[0.0; 3]; NUM_JOINTS];
            for o in &oscillators {
                theta[o.joint][o.axis] +=
                    o.base + o.amplitude * (std::f64::consts::TAU * o.frequency * time + o.phase).sin();
            }
            let cam = CameraParams::new(scale, tx, ty).expect("positive scale");
            tx += drift.0;
            ty += drift.1;
            BodyParams::new(&theta, beta, cam).expect("finite parameters")
        })
        .collect();
    Trajectory { params, appearance_seed }
}

fn labeled_mask(config: &MotionConfig, index: usize) -> Vec<bool> {
    let mut rng = sequence_rng(config.seed ^ 0x5eed_1abe, index);
    (0..config.frames_per_sequence)
        .map(|_| config.labeled_fraction >= 1.0 || rng.random::<f64>() < config.labeled_fraction)
        .collect()
}

/// Renders one sequence and its flows.
pub fn render_sequence(template: &MeshTemplate, size: ImageSize, id: usize, traj: &Trajectory) -> Sequence {
    let settings = RenderSettings::default();
    let appearance = Appearance::new(template, size, traj.appearance_seed);
    let scenes: Vec<PosedScene> = traj
        .params
        .iter()
        .map(|p| PosedScene::new(template, p, size, settings))
        .collect();
    let frames = scenes
        .iter()
        .zip(&traj.params)
        .map(|(s, p)| render_scene(template, s, &appearance, p, size).to_image())
        .collect();
    let n = scenes.len();
    let forward_flows = (0..n - 1)
        .map(|t| flow_between(template, &scenes[t], &scenes[t + 1], &traj.params[t + 1], size))
        .collect();
    let backward_flows = (0..n - 1)
        .map(|t| flow_between(template, &scenes[t + 1], &scenes[t], &traj.params[t], size))
        .collect();
    Sequence {
        id,
        frames,
        forward_flows,
        backward_flows,
        keypoints: None,
    }
}

/// Generates a whole corpus; sequences are rendered on up to `workers`
/// threads with identical results for any worker count.
pub fn generate(template: &MeshTemplate, config: &MotionConfig, workers: usize) -> Result<Dataset> {
    config.validate()?;
    let size = config.image_size();
    let rendered = map_indexed(config.num_sequences, workers, |i| {
        let traj = trajectory(config, i);
        let seq = render_sequence(template, size, i, &traj);
        let mask = labeled_mask(config, i);
        let labels: Vec<Option<BodyParams>> =
            traj.params.into_iter().zip(mask).map(|(p, keep)| keep.then_some(p)).collect();
        (seq, labels)
    });
    let (sequences, labels): (Vec<_>, Vec<_>) = rendered.into_iter().unzip();
    Ok(Dataset {
        size,
        fps: config.fps,
        sequences,
        labels: LabelStore::new(labels),
    })
}
