//! Procedural 24-joint capsule humanoid used as the default mesh template.
//!
//! Model axes: x to the subject's left, y down (so images come out upright
//! under the weak-perspective convention), z away from the camera.

use nalgebra::Vector3;
use std::f64::consts::TAU;

use super::params::{NUM_BETAS, NUM_JOINTS};
use super::template::MeshTemplate;

pub const PARENTS: [i32; NUM_JOINTS] = [
    -1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21,
];

pub const JOINT_NAMES: [&str; NUM_JOINTS] = [
    "pelvis", "left_hip", "right_hip", "spine1", "left_knee", "right_knee", "spine2",
    "left_ankle", "right_ankle", "spine3", "left_foot", "right_foot", "neck", "left_collar",
    "right_collar", "head", "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
    "left_wrist", "right_wrist", "left_hand", "right_hand",
];

const REST_JOINTS: [[f64; 3]; NUM_JOINTS] = [
    [0.0, 0.0, 0.0],
    [0.09, 0.06, 0.0],
    [-0.09, 0.06, 0.0],
    [0.0, -0.12, 0.0],
    [0.10, 0.46, 0.0],
    [-0.10, 0.46, 0.0],
    [0.0, -0.25, 0.0],
    [0.10, 0.86, 0.0],
    [-0.10, 0.86, 0.0],
    [0.0, -0.38, 0.0],
    [0.10, 0.92, -0.12],
    [-0.10, 0.92, -0.12],
    [0.0, -0.56, 0.0],
    [0.08, -0.50, 0.0],
    [-0.08, -0.50, 0.0],
    [0.0, -0.78, 0.0],
    [0.19, -0.50, 0.0],
    [-0.19, -0.50, 0.0],
    [0.45, -0.50, 0.0],
    [-0.45, -0.50, 0.0],
    [0.70, -0.50, 0.0],
    [-0.70, -0.50, 0.0],
    [0.80, -0.50, 0.0],
    [-0.80, -0.50, 0.0],
];

/// Capsule radius of the bone ending at each joint (index 0 unused).
const RADII: [f64; NUM_JOINTS] = [
    0.0, 0.09, 0.09, 0.12, 0.08, 0.08, 0.125, 0.06, 0.06, 0.13, 0.05, 0.05, 0.06, 0.07, 0.07,
    0.10, 0.06, 0.06, 0.055, 0.055, 0.048, 0.048, 0.045, 0.045,
];

const RING: usize = 8;
const LEAVES: [usize; 5] = [10, 11, 15, 22, 23];
const SPINE: [usize; 3] = [3, 6, 9];
const LEGS: [usize; 6] = [4, 5, 7, 8, 10, 11];
const ARMS: [usize; 8] = [16, 17, 18, 19, 20, 21, 22, 23];

struct VertexInfo {
    bone: usize,
    /// Offset from the bone axis.
    offset: Vector3<f64>,
    position: Vector3<f64>,
}

fn joint(j: usize) -> Vector3<f64> {
    Vector3::from(REST_JOINTS[j])
}

fn ring_frame(d: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let reference = if d.z.abs() < 0.9 {
        Vector3::z()
    } else {
        Vector3::x()
    };
    let u = d.cross(&reference).normalize();
    let w = d.cross(&u);
    (u, w)
}

/// Generates the default humanoid (V = 402, F = 496, J = 24).
pub fn procedural_humanoid() -> MeshTemplate {
    let mut verts: Vec<VertexInfo> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();
    let mut skin: Vec<[f64; NUM_JOINTS]> = Vec::new();
    let mut regressor = Vec::new();
    let mut last_ring: [usize; NUM_JOINTS] = [0; NUM_JOINTS];
    let mut root_ring = 0;

    let weights_for = |bone: usize, first_ring: bool| {
        let p = PARENTS[bone] as usize;
        let mut w = [0.0; NUM_JOINTS];
        match PARENTS[p] {
            pp if first_ring && pp >= 0 => {
                w[p] = 0.5;
                w[pp as usize] = 0.5;
            }
            _ => w[p] = 1.0,
        }
        w
    };

    for bone in 1..NUM_JOINTS {
        let p = PARENTS[bone] as usize;
        let (a, b) = (joint(p), joint(bone));
        let d = (b - a).normalize();
        let (u, w) = ring_frame(&d);
        let r = RADII[bone];
        let rings = if SPINE.contains(&bone) { 3 } else { 2 };
        let mut ring_starts = Vec::new();
        for k in 0..rings {
            let t = k as f64 / (rings - 1) as f64;
            let center = a + (b - a) * t;
            ring_starts.push(verts.len());
            for i in 0..RING {
                let phi = TAU * i as f64 / RING as f64;
                let offset = (u * phi.cos() + w * phi.sin()) * r;
                verts.push(VertexInfo {
                    bone,
                    offset,
                    position: center + offset,
                });
                skin.push(weights_for(bone, k == 0));
            }
        }
        for k in 0..rings - 1 {
            let (r0, r1) = (ring_starts[k], ring_starts[k + 1]);
            for i in 0..RING {
                let n = (i + 1) % RING;
                let (q0, q1, q2, q3) = (r0 + i, r0 + n, r1 + n, r1 + i);
                faces.push([q0 as u32, q1 as u32, q2 as u32]);
                faces.push([q0 as u32, q2 as u32, q3 as u32]);
            }
        }
        if LEAVES.contains(&bone) {
            for (ring, apex, first) in [
                (ring_starts[0], a - d * r, true),
                (ring_starts[rings - 1], b + d * r, false),
            ] {
                let c = verts.len();
                verts.push(VertexInfo {
                    bone,
                    offset: apex - if first { a } else { b },
                    position: apex,
                });
                skin.push(weights_for(bone, first));
                for i in 0..RING {
                    let n = (i + 1) % RING;
                    faces.push([c as u32, (ring + i) as u32, (ring + n) as u32]);
                }
            }
        }
        last_ring[bone] = ring_starts[rings - 1];
        if bone == 3 {
            root_ring = ring_starts[0];
        }
    }

    let v = verts.len();
    regressor.resize(NUM_JOINTS * v, 0.0);
    for j in 0..NUM_JOINTS {
        let start = if j == 0 { root_ring } else { last_ring[j] };
        for i in 0..RING {
            regressor[j * v + start + i] = 1.0 / RING as f64;
        }
    }

    let basis: Vec<Vec<Vector3<f64>>> = (0..NUM_BETAS)
        .map(|k| verts.iter().map(|info| shape_direction(k, info)).collect())
        .collect();

    MeshTemplate::new(
        verts.iter().map(|i| i.position).collect(),
        faces,
        regressor,
        skin.concat(),
        basis,
        PARENTS.to_vec(),
    )
    .expect("procedural humanoid is valid")
}

fn shape_direction(k: usize, info: &VertexInfo) -> Vector3<f64> {
    let p = info.position;
    let bone = info.bone;
    let upper = SPINE.contains(&bone) || ARMS.contains(&bone) || [12, 13, 14, 15].contains(&bone);
    match k {
        0 => p * 0.08,
        1 => info.offset * 0.15,
        2 if LEGS.contains(&bone) => Vector3::new(0.0, 0.08 * ((p.y - 0.06).max(0.0) / 0.86), 0.0),
        3 if ARMS.contains(&bone) => {
            Vector3::new(0.08 * p.x.signum() * ((p.x.abs() - 0.19).max(0.0) / 0.61), 0.0, 0.0)
        }
        4 if upper => Vector3::new(0.0, -0.06 * (-p.y / 0.56).clamp(0.0, 1.0), 0.0),
        5 if ARMS.contains(&bone) || bone == 13 || bone == 14 => {
            Vector3::new(0.04 * p.x.signum() * (p.x.abs() / 0.19).clamp(0.0, 1.0), 0.0, 0.0)
        }
        6 if LEGS.contains(&bone) || bone == 1 || bone == 2 => {
            Vector3::new(0.03 * p.x.signum() * (p.x.abs() / 0.09).clamp(0.0, 1.0), 0.0, 0.0)
        }
        7 if SPINE.contains(&bone) => {
            let r = info.offset.norm().max(1e-9);
            info.offset * (0.4 * (-info.offset.z / r).max(0.0))
        }
        8 if bone == 15 => (p - (joint(12) + joint(15)) * 0.5) * 0.2,
        9 if ARMS.contains(&bone) || LEGS.contains(&bone) => info.offset * 0.2,
        _ => Vector3::zeros(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_reproduces_bundled_asset() {
        let generated = procedural_humanoid();
        assert_eq!(generated.num_vertices(), 402);
        assert_eq!(generated.num_faces(), 496);
        assert_eq!(
            generated.to_bytes(),
            include_bytes!("../../assets/humanoid.fftm").to_vec(),
            "run `cargo run -p flowfit --example write_template` to refresh the asset"
        );
    }

    #[test]
    fn regressed_rest_joints_match_layout() {
        let t = procedural_humanoid();
        let joints = t.regress_joints(t.rest_vertices());
        for (j, p) in joints.iter().enumerate() {
            assert!((p - joint(j)).norm() < 1e-9, "joint {j}");
        }
    }
}
