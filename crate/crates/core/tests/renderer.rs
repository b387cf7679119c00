use flowfit::body::{forward, project_point, BodyParams, CameraParams, ImageSize, MeshTemplate, NUM_BETAS, NUM_JOINTS};
use flowfit::render::{ground_truth_flow, render, render_with, visibility, Appearance, PosedScene, RenderSettings};
use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SIZE: ImageSize = ImageSize::new(64, 64);

fn posed(theta_entries: &[(usize, [f64; 3])], cam: CameraParams) -> BodyParams {
    let mut theta = vec![[0.0; 3]; NUM_JOINTS];
    for &(j, w) in theta_entries {
        theta[j] = w;
    }
    BodyParams::new(&theta, [0.0; NUM_BETAS], cam).unwrap()
}

fn walking(phase: f64) -> BodyParams {
    posed(
        &[
            (0, [0.0, 0.4 * phase.sin(), 0.0]),
            (1, [0.5 * phase.sin(), 0.0, 0.0]),
            (2, [-0.5 * phase.sin(), 0.0, 0.0]),
            (4, [0.3 + 0.3 * phase.cos(), 0.0, 0.0]),
            (16, [0.0, 0.3, 0.6 * phase.cos()]),
            (18, [0.0, 0.5, 0.0]),
            (17, [0.0, -0.3, -0.4]),
        ],
        CameraParams::new(0.9, 0.02, -0.05).unwrap(),
    )
}

/// Front-most model-space depth covering (x, y), by brute force over all faces.
fn min_z_oracle(vertices: &[Vector3<f64>], faces: &[[u32; 3]], x: f64, y: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    for f in faces {
        let [a, b, c] = f.map(|i| vertices[i as usize]);
        let det = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
        if det.abs() < 1e-14 {
            continue;
        }
        let u = ((x - a.x) * (c.y - a.y) - (y - a.y) * (c.x - a.x)) / det;
        let v = ((b.x - a.x) * (y - a.y) - (b.y - a.y) * (x - a.x)) / det;
        if u < -1e-9 || v < -1e-9 || u + v > 1.0 + 1e-9 {
            continue;
        }
        let z = a.z + u * (b.z - a.z) + v * (c.z - a.z);
        best = Some(best.map_or(z, |m: f64| m.min(z)));
    }
    best
}

#[test]
fn rendering_is_deterministic() {
    let t = MeshTemplate::default_humanoid();
    let p = BodyParams::rest(CameraParams::default());
    assert_eq!(render(&t, &p, SIZE, 7), render(&t, &p, SIZE, 7));
    assert_ne!(render(&t, &p, SIZE, 7).image, render(&t, &p, SIZE, 8).image);
}

#[test]
fn body_behind_camera_leaves_only_background() {
    let t = MeshTemplate::default_humanoid();
    let p = BodyParams::rest(CameraParams::default());
    let settings = RenderSettings { camera_distance: -5.0, ..Default::default() };
    let frame = render_with(&t, &p, SIZE, 3, settings);
    assert!(frame.depth.iter().all(|d| d.is_infinite()));
    assert_eq!(frame.image, Appearance::new(&t, SIZE, 3).background);
}

#[test]
fn silhouette_area_matches_brute_force_scan() {
    let t = MeshTemplate::default_humanoid();
    for phase in [0.0, 1.3, 2.9] {
        let p = walking(phase);
        let frame = render(&t, &p, SIZE, 1);
        let mesh = forward(&t, &p);
        let cam = p.camera();
        let scale = cam.scale;
        let mut covered = 0;
        for row in 0..SIZE.height {
            for col in 0..SIZE.width {
                // invert the projection of the pixel center into model x, y
                let x = ((col as f64 + 0.5) / 32.0 - 1.0) / scale - cam.tx;
                let y = ((row as f64 + 0.5) / 32.0 - 1.0) / scale - cam.ty;
                if min_z_oracle(&mesh.vertices, t.faces(), x, y).is_some() {
                    covered += 1;
                }
            }
        }
        assert_eq!(frame.body_pixels(), covered, "phase {phase}");
        assert!(covered > 300);
    }
}

#[test]
fn visibility_agrees_with_ray_casting() {
    let t = MeshTemplate::default_humanoid();
    let p = BodyParams::rest(CameraParams::default());
    let mesh = forward(&t, &p);
    let mask = visibility(&t, &p, SIZE).mask;
    let mut checked = 0;
    let mut front_visible = 0;
    let mut agree = 0;
    for (v, x) in mesh.vertices.iter().enumerate() {
        let front = min_z_oracle(&mesh.vertices, t.faces(), x.x, x.y).unwrap();
        agree += (mask[v] == (front >= x.z - 1e-3)) as usize;
        // spine segments
        if ![3, 6].contains(&t.dominant_joint(v)) {
            continue;
        }
        // front-facing ring vertices sit at z = -r, back-facing ones at +r
        if x.z < -0.05 {
            front_visible += mask[v] as usize;
        } else if x.z > 0.05 {
            assert!(!mask[v], "back vertex {v} visible");
            checked += 1;
        }
    }
    assert!(checked >= 10 && front_visible >= 5);
    assert_eq!(agree, mesh.vertices.len());
}

#[test]
fn visible_vertices_sit_on_the_rendered_surface() {
    let t = MeshTemplate::default_humanoid();
    for phase in [0.4, 2.0] {
        let p = walking(phase);
        let scene = PosedScene::new(&t, &p, SIZE, RenderSettings::default());
        let vis = scene.visibility();
        let pts = scene.index.projected();
        let depths = scene.index.vertex_depths();
        for v in (0..t.num_vertices()).filter(|&v| vis.mask[v]) {
            let d = scene.depth_at(&pts[v]);
            assert!((d - depths[v]).abs() < 1e-3, "vertex {v}: {d} vs {}", depths[v]);
        }
    }
}

#[test]
fn offscreen_body_has_no_visible_vertices() {
    let t = MeshTemplate::default_humanoid();
    let p = BodyParams::rest(CameraParams::new(0.9, 5.0, 0.0).unwrap());
    assert_eq!(visibility(&t, &p, SIZE).count(), 0);
}

#[test]
fn identical_frames_have_zero_flow() {
    let t = MeshTemplate::default_humanoid();
    let p = walking(0.7);
    let flow = ground_truth_flow(&t, &p, &p, SIZE);
    assert!(flow.valid_count() > 300);
    for r in 0..64 {
        for c in 0..64 {
            if flow.is_valid(r, c) {
                assert!(flow.at(r, c).norm() < 1e-5);
            }
        }
    }
}

#[test]
fn camera_translation_gives_uniform_flow() {
    let t = MeshTemplate::default_humanoid();
    let p1 = walking(0.2);
    let cam = p1.camera();
    let dt = 0.05;
    let p2 = p1.with_camera(CameraParams::new(cam.scale, cam.tx + dt, cam.ty).unwrap()).unwrap();
    let flow = ground_truth_flow(&t, &p1, &p2, SIZE);
    let expected = dt * 32.0 * cam.scale;
    let mut n = 0;
    for r in 0..64 {
        for c in 0..64 {
            if flow.is_valid(r, c) {
                let f = flow.at(r, c);
                assert!((f.x - expected).abs() < 0.51 && f.y.abs() < 0.51);
                n += 1;
            }
        }
    }
    assert!(n > 300);
}

#[test]
fn flow_follows_vertex_projections() {
    let t = MeshTemplate::default_humanoid();
    let (p1, p2) = (walking(1.0), walking(1.15));
    let flow = ground_truth_flow(&t, &p1, &p2, SIZE);
    let m1 = forward(&t, &p1);
    let m2 = forward(&t, &p2);
    let vis = visibility(&t, &p1, SIZE).and(&visibility(&t, &p2, SIZE));
    let mut n = 0;
    for v in (0..t.num_vertices()).filter(|&v| vis.mask[v]) {
        let a = project_point(&m1.vertices[v], &p1.camera(), SIZE);
        let b = project_point(&m2.vertices[v], &p2.camera(), SIZE);
        let (r, c) = (a.y.floor() as usize, a.x.floor() as usize);
        if flow.is_valid(r, c) {
            assert!((flow.at(r, c) - (b - a)).norm() < 1.0, "vertex {v}");
            n += 1;
        }
    }
    assert!(n > 50);
}

#[test]
fn valid_flow_pixels_are_unoccluded_in_both_frames() {
    let t = MeshTemplate::default_humanoid();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for pair in 0..3 {
        let (p1, p2) = (walking(pair as f64), walking(pair as f64 + 0.4));
        let flow = ground_truth_flow(&t, &p1, &p2, SIZE);
        let (m1, m2) = (forward(&t, &p1), forward(&t, &p2));
        let s1 = PosedScene::new(&t, &p1, SIZE, RenderSettings::default());
        let valid: Vec<(usize, usize)> = (0..64 * 64).map(|i| (i / 64, i % 64)).filter(|&(r, c)| flow.is_valid(r, c)).collect();
        for _ in 0..100 {
            let (r, c) = valid[rng.random_range(0..valid.len())];
            let px = Vector2::new(c as f64 + 0.5, r as f64 + 0.5);
            let hit = s1.index.front_at(&px).unwrap();
            let f = t.faces()[hit.face];
            let x1: Vector3<f64> = f.iter().zip(hit.barycentric).map(|(&v, l)| m1.vertices[v as usize] * l).sum();
            let x2: Vector3<f64> = f.iter().zip(hit.barycentric).map(|(&v, l)| m2.vertices[v as usize] * l).sum();
            for (mesh, x) in [(&m1, x1), (&m2, x2)] {
                let front = min_z_oracle(&mesh.vertices, t.faces(), x.x, x.y).unwrap();
                assert!(front >= x.z - 1e-3, "pixel ({r},{c}) occluded");
            }
        }
    }
}
