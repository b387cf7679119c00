use nalgebra::Vector3;

use super::params::{NUM_BETAS, NUM_JOINTS};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"FFTM";
const VERSION: u32 = 1;

/// Fixed-topology articulated mesh: rest shape, linear shape basis, joint
/// regressor, skinning weights and kinematic tree.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshTemplate {
    rest_vertices: Vec<Vector3<f64>>,
    faces: Vec<[u32; 3]>,
    /// J x V, row-major.
    joint_regressor: Vec<f64>,
    /// V x J, row-major.
    skinning_weights: Vec<f64>,
    /// K x V displacement directions.
    shape_basis: Vec<Vec<Vector3<f64>>>,
    kinematic_parents: Vec<i32>,
    // derived
    skin_sparse: Vec<Vec<(usize, f64)>>,
    regressor_sparse: Vec<Vec<(usize, f64)>>,
    order: Vec<usize>,
}

impl MeshTemplate {
    pub fn new(
        rest_vertices: Vec<Vector3<f64>>,
        faces: Vec<[u32; 3]>,
        joint_regressor: Vec<f64>,
        skinning_weights: Vec<f64>,
        shape_basis: Vec<Vec<Vector3<f64>>>,
        kinematic_parents: Vec<i32>,
    ) -> Result<Self> {
        let v = rest_vertices.len();
        let j = kinematic_parents.len();
        let bad = |msg: String| Err(Error::Template(msg));
        if j != NUM_JOINTS {
            return bad(format!("expected {NUM_JOINTS} joints, got {j}"));
        }
        if rest_vertices.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return bad("non-finite rest vertex".into());
        }
        if let Some(f) = faces.iter().find(|f| f.iter().any(|&i| i as usize >= v)) {
            return bad(format!("face {f:?} indexes past {v} vertices"));
        }
        if joint_regressor.len() != j * v || skinning_weights.len() != v * j {
            return bad("regressor or skinning matrix has the wrong size".into());
        }
        if shape_basis.len() != NUM_BETAS || shape_basis.iter().any(|b| b.len() != v) {
            return bad(format!("shape basis must be {NUM_BETAS} x {v}"));
        }
        for (row, w) in skinning_weights.chunks_exact(j).enumerate() {
            if w.iter().any(|&x| x < 0.0 || !x.is_finite()) {
                return bad(format!("negative skinning weight on vertex {row}"));
            }
            let sum: f64 = w.iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return bad(format!("skinning weights of vertex {row} sum to {sum}"));
            }
        }
        for (row, w) in joint_regressor.chunks_exact(v).enumerate() {
            let sum: f64 = w.iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return bad(format!("joint regressor row {row} sums to {sum}"));
            }
        }
        let order = topological_order(&kinematic_parents)?;

        let skin_sparse = skinning_weights
            .chunks_exact(j)
            .map(|w| w.iter().copied().enumerate().filter(|(_, x)| *x != 0.0).collect())
            .collect();
        let regressor_sparse = joint_regressor
            .chunks_exact(v)
            .map(|w| w.iter().copied().enumerate().filter(|(_, x)| *x != 0.0).collect())
            .collect();
        Ok(Self {
            rest_vertices,
            faces,
            joint_regressor,
            skinning_weights,
            shape_basis,
            kinematic_parents,
            skin_sparse,
            regressor_sparse,
            order,
        })
    }

    /// The procedurally generated 24-joint humanoid shipped with the crate.
    pub fn default_humanoid() -> Self {
        Self::from_bytes(include_bytes!("../../assets/humanoid.fftm"))
            .expect("bundled template is valid")
    }

    pub fn num_vertices(&self) -> usize {
        self.rest_vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_joints(&self) -> usize {
        self.kinematic_parents.len()
    }

    pub fn rest_vertices(&self) -> &[Vector3<f64>] {
        &self.rest_vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn joint_regressor(&self) -> &[f64] {
        &self.joint_regressor
    }

    pub fn skinning_weights(&self) -> &[f64] {
        &self.skinning_weights
    }

    pub fn shape_direction(&self, k: usize) -> &[Vector3<f64>] {
        &self.shape_basis[k]
    }

    pub fn kinematic_parents(&self) -> &[i32] {
        &self.kinematic_parents
    }

    pub fn parent(&self, joint: usize) -> Option<usize> {
        usize::try_from(self.kinematic_parents[joint]).ok()
    }

    /// Joints ordered so that every parent precedes its children.
    pub fn joint_order(&self) -> &[usize] {
        &self.order
    }

    pub(crate) fn skin(&self, vertex: usize) -> &[(usize, f64)] {
        &self.skin_sparse[vertex]
    }

    pub(crate) fn regressor_row(&self, joint: usize) -> &[(usize, f64)] {
        &self.regressor_sparse[joint]
    }

    /// Index of the joint with the largest skinning weight on `vertex`.
    pub fn dominant_joint(&self, vertex: usize) -> usize {
        self.skin_sparse[vertex]
            .iter()
            .fold((0, -1.0), |best, &(j, w)| if w > best.1 { (j, w) } else { best })
            .0
    }

    /// Applies the joint regressor to arbitrary vertex positions.
    pub fn regress_joints(&self, vertices: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
        self.regressor_sparse
            .iter()
            .map(|row| row.iter().map(|&(v, w)| vertices[v] * w).sum())
            .collect()
    }

    /// Serializes to the template archive layout: `FFTM`, version, V, F, J, K
    /// as little-endian u32, then little-endian f32 arrays in field order
    /// (rest vertices, faces, joint regressor, skinning weights, shape basis,
    /// kinematic parents).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        for n in [
            VERSION,
            self.num_vertices() as u32,
            self.num_faces() as u32,
            self.num_joints() as u32,
            NUM_BETAS as u32,
        ] {
            out.extend_from_slice(&n.to_le_bytes());
        }
        let mut put = |x: f64| out.extend_from_slice(&(x as f32).to_le_bytes());
        self.rest_vertices.iter().flat_map(|p| p.iter().copied()).for_each(&mut put);
        self.faces.iter().flat_map(|f| f.iter().map(|&i| i as f64)).for_each(&mut put);
        self.joint_regressor.iter().copied().for_each(&mut put);
        self.skinning_weights.iter().copied().for_each(&mut put);
        self.shape_basis
            .iter()
            .flat_map(|b| b.iter().flat_map(|p| p.iter().copied()))
            .for_each(&mut put);
        self.kinematic_parents.iter().map(|&p| p as f64).for_each(&mut put);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let err = |d: &str| Error::format("template archive", d);
        if bytes.len() < 24 || &bytes[..4] != MAGIC {
            return Err(err("missing FFTM header"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
        if word(0) != VERSION {
            return Err(err("unsupported version"));
        }
        let (v, f, j, k) = (word(1) as usize, word(2) as usize, word(3) as usize, word(4) as usize);
        let total = v * 3 + f * 3 + j * v + v * j + k * v * 3 + j;
        let body = &bytes[24..];
        if body.len() != total * 4 {
            return Err(err("payload length does not match header"));
        }
        let mut floats = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
        let mut take = |n: usize| floats.by_ref().take(n).collect::<Vec<f64>>();
        let to_points = |xs: Vec<f64>| {
            xs.chunks_exact(3)
                .map(|c| Vector3::new(c[0], c[1], c[2]))
                .collect::<Vec<_>>()
        };
        let rest = to_points(take(v * 3));
        let faces = take(f * 3)
            .chunks_exact(3)
            .map(|c| [c[0] as u32, c[1] as u32, c[2] as u32])
            .collect();
        let regressor = take(j * v);
        let skinning = take(v * j);
        let basis = (0..k).map(|_| to_points(take(v * 3))).collect();
        let parents = take(j).into_iter().map(|p| p as i32).collect();
        Self::new(rest, faces, regressor, skinning, basis, parents)
    }
}

fn topological_order(parents: &[i32]) -> Result<Vec<usize>> {
    let n = parents.len();
    let roots: Vec<usize> = (0..n).filter(|&j| parents[j] < 0).collect();
    if roots.len() != 1 {
        return Err(Error::Template(format!(
            "kinematic tree needs exactly one root, found {}",
            roots.len()
        )));
    }
    if let Some(j) = (0..n).find(|&j| parents[j] >= n as i32 || parents[j] == j as i32) {
        return Err(Error::Template(format!("joint {j} has an invalid parent")));
    }
    let mut order = roots;
    let mut i = 0;
    while i < order.len() {
        let p = order[i] as i32;
        order.extend((0..n).filter(|&c| parents[c] == p));
        i += 1;
    }
    if order.len() != n {
        return Err(Error::Template("kinematic tree contains a cycle".into()));
    }
    Ok(order)
}
