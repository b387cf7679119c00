//! Synthetic frames, vertex visibility and exact ground-truth flow.

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::flow::FlowMap;
use super::image::Image;
use super::raster::SurfaceIndex;
use crate::body::{forward, project_point, BodyMesh, BodyParams, ImageSize, MeshTemplate};

/// Depth tolerance for occlusion tests, in meters.
pub const DEPTH_EPSILON: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderSettings {
    /// Distance from the image plane to the body origin along +z.
    pub camera_distance: f64,
    pub depth_epsilon: f64,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            camera_distance: 5.0,
            depth_epsilon: DEPTH_EPSILON,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderedFrame {
    pub size: ImageSize,
    /// Row-major RGB in [0, 1].
    pub image: Vec<f32>,
    /// Row-major depth in meters, infinite on background pixels.
    pub depth: Vec<f64>,
    pub params: BodyParams,
}

impl RenderedFrame {
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.image
            .iter()
            .map(|&c| (c.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    pub fn to_image(&self) -> Image {
        Image {
            size: self.size,
            rgb: self.to_rgb8(),
        }
    }

    pub fn body_pixels(&self) -> usize {
        self.depth.iter().filter(|d| d.is_finite()).count()
    }
}

/// Per-vertex visibility.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VisibilityMask {
    pub mask: Vec<bool>,
}

impl VisibilityMask {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn and(&self, other: &VisibilityMask) -> VisibilityMask {
        VisibilityMask {
            mask: self.mask.iter().zip(&other.mask).map(|(a, b)| *a && *b).collect(),
        }
    }
}

/// Posed mesh with its surface index, reused by all geometric queries.
pub struct PosedScene {
    pub mesh: BodyMesh,
    pub index: SurfaceIndex,
    pub settings: RenderSettings,
}

impl PosedScene {
    pub fn new(template: &MeshTemplate, params: &BodyParams, size: ImageSize, settings: RenderSettings) -> Self {
        let mesh = forward(template, params);
        Self::from_mesh(template, mesh, params, size, settings)
    }

    pub fn from_mesh(
        template: &MeshTemplate,
        mesh: BodyMesh,
        params: &BodyParams,
        size: ImageSize,
        settings: RenderSettings,
    ) -> Self {
        let index = SurfaceIndex::build(&mesh.vertices, template.faces(), &params.camera(), size, settings.camera_distance);
        Self { mesh, index, settings }
    }

    /// A vertex is visible when it projects inside the frame and no surface
    /// lies in front of it by more than the depth tolerance at its exact
    /// projected location.
    pub fn visibility(&self) -> VisibilityMask {
        let size = self.index.size();
        let pts = self.index.projected();
        let depths = self.index.vertex_depths();
        let mask = pts
            .iter()
            .zip(depths)
            .map(|(p, &d)| d > 0.0 && size.contains(p) && self.index.unoccluded(p, d, self.settings.depth_epsilon))
            .collect();
        VisibilityMask { mask }
    }

    /// Depth of the front-most surface at a continuous image location.
    pub fn depth_at(&self, p: &Vector2<f64>) -> f64 {
        self.index.front_at(p).map_or(f64::INFINITY, |h| h.depth)
    }
}

pub fn visibility(template: &MeshTemplate, params: &BodyParams, size: ImageSize) -> VisibilityMask {
    PosedScene::new(template, params, size, RenderSettings::default()).visibility()
}

pub fn render(template: &MeshTemplate, params: &BodyParams, size: ImageSize, appearance_seed: u64) -> RenderedFrame {
    render_with(template, params, size, appearance_seed, RenderSettings::default())
}

pub fn render_with(
    template: &MeshTemplate,
    params: &BodyParams,
    size: ImageSize,
    appearance_seed: u64,
    settings: RenderSettings,
) -> RenderedFrame {
    let scene = PosedScene::new(template, params, size, settings);
    let appearance = Appearance::new(template, size, appearance_seed);
    render_scene(template, &scene, &appearance, params, size)
}

/// Shades an already posed scene with a given appearance.
pub fn render_scene(
    template: &MeshTemplate,
    scene: &PosedScene,
    appearance: &Appearance,
    params: &BodyParams,
    size: ImageSize,
) -> RenderedFrame {
    let faces = template.faces();
    let mut image = appearance.background.clone();
    let mut depth = vec![f64::INFINITY; size.pixels()];
    for row in 0..size.height {
        for col in 0..size.width {
            let c = Vector2::new(col as f64 + 0.5, row as f64 + 0.5);
            if let Some(hit) = scene.index.front_at(&c) {
                let i = row * size.width + col;
                depth[i] = hit.depth;
                let [a, b, cc] = faces[hit.face].map(|v| scene.mesh.vertices[v as usize]);
                let n = (b - a).cross(&(cc - a));
                let shade = 0.6 + 0.4 * (n.z.abs() / n.norm().max(1e-12));
                for k in 0..3 {
                    image[3 * i + k] = (appearance.face_colors[hit.face][k] * shade as f32).clamp(0.0, 1.0);
                }
            }
        }
    }
    RenderedFrame {
        size,
        image,
        depth,
        params: params.clone(),
    }
}

/// Flow from frame 1 to frame 2: each body pixel of frame 1 follows its
/// surface point to its frame-2 projection. Pixels are valid when that point
/// is unoccluded and inside frame 2; background pixels carry zero flow.
pub fn ground_truth_flow(template: &MeshTemplate, params_1: &BodyParams, params_2: &BodyParams, size: ImageSize) -> FlowMap {
    let settings = RenderSettings::default();
    let first = PosedScene::new(template, params_1, size, settings);
    let second = PosedScene::new(template, params_2, size, settings);
    flow_between(template, &first, &second, params_2, size)
}

pub fn flow_between(
    template: &MeshTemplate,
    first: &PosedScene,
    second: &PosedScene,
    params_2: &BodyParams,
    size: ImageSize,
) -> FlowMap {
    let n = size.pixels();
    let (mut dx, mut dy, mut valid) = (vec![0f32; n], vec![0f32; n], vec![0u8; n]);
    let cam2 = params_2.camera();
    let faces = template.faces();
    let eps = second.settings.depth_epsilon;
    for row in 0..size.height {
        for col in 0..size.width {
            let c = Vector2::new(col as f64 + 0.5, row as f64 + 0.5);
            let Some(hit) = first.index.front_at(&c) else { continue };
            let point: Vector3<f64> = faces[hit.face]
                .iter()
                .zip(hit.barycentric)
                .map(|(&v, l)| second.mesh.vertices[v as usize] * l)
                .sum();
            let p2 = project_point(&point, &cam2, size);
            let i = row * size.width + col;
            dx[i] = (p2.x - c.x) as f32;
            dy[i] = (p2.y - c.y) as f32;
            let depth2 = point.z + second.settings.camera_distance;
            let visible = depth2 > 0.0 && size.contains(&p2) && second.index.unoccluded(&p2, depth2, eps);
            valid[i] = visible as u8;
        }
    }
    FlowMap::new(size, dx, dy, valid).expect("flow planes are consistent")
}

/// Per-face colors and the background texture derived from one seed.
pub struct Appearance {
    pub face_colors: Vec<[f32; 3]>,
    pub background: Vec<f32>,
}

const PART_COLORS: [[f32; 3]; 6] = [
    [0.35, 0.65, 0.35], // torso
    [0.95, 0.85, 0.35], // head
    [0.90, 0.25, 0.25], // left arm
    [0.25, 0.35, 0.95], // right arm
    [0.95, 0.55, 0.15], // left leg
    [0.20, 0.85, 0.85], // right leg
];

fn part_of(joint: usize) -> usize {
    match joint {
        0 | 3 | 6 | 9 => 0,
        12 | 15 => 1,
        13 | 16 | 18 | 20 | 22 => 2,
        14 | 17 | 19 | 21 | 23 => 3,
        1 | 4 | 7 | 10 => 4,
        _ => 5,
    }
}

impl Appearance {
    pub fn new(template: &MeshTemplate, size: ImageSize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tints: Vec<[f32; 3]> = PART_COLORS
            .iter()
            .map(|c| c.map(|x| (x + rng.random_range(-0.08..0.08)).clamp(0.05, 1.0)))
            .collect();
        let face_colors = template
            .faces()
            .iter()
            .map(|f| {
                let part = part_of(template.dominant_joint(f[2] as usize));
                let jitter = rng.random_range(-0.07f32..0.07);
                tints[part].map(|x| (x + jitter).clamp(0.0, 1.0))
            })
            .collect();
        let background = smooth_noise(size, &mut rng);
        Self { face_colors, background }
    }
}

/// Two octaves of bilinearly interpolated value noise.
fn smooth_noise(size: ImageSize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let mut out = vec![0.0f32; size.pixels() * 3];
    for (cells, amplitude) in [(5usize, 0.5f32), (11, 0.2)] {
        let grid: Vec<f32> = (0..(cells + 1) * (cells + 1) * 3).map(|_| rng.random_range(0.0..1.0)).collect();
        for row in 0..size.height {
            let gy = (row as f32 + 0.5) / size.height as f32 * cells as f32;
            let y0 = (gy.floor() as usize).min(cells - 1);
            let ty = smoothstep(gy - y0 as f32);
            for col in 0..size.width {
                let gx = (col as f32 + 0.5) / size.width as f32 * cells as f32;
                let x0 = (gx.floor() as usize).min(cells - 1);
                let tx = smoothstep(gx - x0 as f32);
                for k in 0..3 {
                    let g = |y: usize, x: usize| grid[(y * (cells + 1) + x) * 3 + k];
                    let top = g(y0, x0) * (1.0 - tx) + g(y0, x0 + 1) * tx;
                    let bottom = g(y0 + 1, x0) * (1.0 - tx) + g(y0 + 1, x0 + 1) * tx;
                    out[(row * size.width + col) * 3 + k] += amplitude * (top * (1.0 - ty) + bottom * ty);
                }
            }
        }
    }
    out.iter_mut().for_each(|v| *v = (*v + 0.15).clamp(0.0, 1.0));
    out
}

fn smoothstep(t: f32) -> f32 {
    t * t * (3.0 - 2.0 * t)
}
