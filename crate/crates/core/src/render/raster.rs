//! Binned triangle lookup over a projected mesh.
//!
//! Every query returns the front-most surface at an arbitrary continuous image
//! location, which is what rasterization, vertex visibility and flow validity
//! all reduce to. Faces are binned into the pixel cells their bounding boxes
//! touch.

use nalgebra::{Vector2, Vector3};

use crate::body::{project_points, CameraParams, ImageSize};

const INSIDE_TOLERANCE: f64 = 1e-9;
const MIN_AREA: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceHit {
    pub face: usize,
    pub depth: f64,
    pub barycentric: [f64; 3],
}

#[derive(Clone, Debug)]
pub struct SurfaceIndex {
    size: ImageSize,
    points: Vec<Vector2<f64>>,
    depths: Vec<f64>,
    faces: Vec<[u32; 3]>,
    bin_start: Vec<u32>,
    bin_faces: Vec<u32>,
}

impl SurfaceIndex {
    /// Projects `vertices` and bins `faces`. Depth is `z + camera_distance`;
    /// faces touching non-positive depth (behind the camera) and zero-area
    /// projections are dropped.
    pub fn build(
        vertices: &[Vector3<f64>],
        faces: &[[u32; 3]],
        camera: &CameraParams,
        size: ImageSize,
        camera_distance: f64,
    ) -> Self {
        let points = project_points(vertices, camera, size);
        let depths: Vec<f64> = vertices.iter().map(|v| v.z + camera_distance).collect();
        let (w, h) = (size.width as i64, size.height as i64);

        let cells_of = |f: &[u32; 3]| -> Option<(i64, i64, i64, i64)> {
            let [a, b, c] = f.map(|i| i as usize);
            if depths[a] <= 0.0 || depths[b] <= 0.0 || depths[c] <= 0.0 {
                return None;
            }
            let (pa, pb, pc) = (points[a], points[b], points[c]);
            if cross(&(pb - pa), &(pc - pa)).abs() < MIN_AREA {
                return None;
            }
            let x0 = pa.x.min(pb.x).min(pc.x).floor() as i64;
            let x1 = pa.x.max(pb.x).max(pc.x).floor() as i64;
            let y0 = pa.y.min(pb.y).min(pc.y).floor() as i64;
            let y1 = pa.y.max(pb.y).max(pc.y).floor() as i64;
            if x1 < 0 || y1 < 0 || x0 >= w || y0 >= h {
                return None;
            }
            Some((x0.max(0), x1.min(w - 1), y0.max(0), y1.min(h - 1)))
        };

        let mut counts = vec![0u32; size.pixels() + 1];
        let ranges: Vec<Option<(i64, i64, i64, i64)>> = faces.iter().map(cells_of).collect();
        for (x0, x1, y0, y1) in ranges.iter().flatten() {
            for y in *y0..=*y1 {
                for x in *x0..=*x1 {
                    counts[(y * w + x) as usize + 1] += 1;
                }
            }
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let mut fill = counts.clone();
        let mut bin_faces = vec![0u32; *counts.last().unwrap() as usize];
        for (fi, r) in ranges.iter().enumerate() {
            if let Some((x0, x1, y0, y1)) = r {
                for y in *y0..=*y1 {
                    for x in *x0..=*x1 {
                        let cell = (y * w + x) as usize;
                        bin_faces[fill[cell] as usize] = fi as u32;
                        fill[cell] += 1;
                    }
                }
            }
        }
        Self {
            size,
            points,
            depths,
            faces: faces.to_vec(),
            bin_start: counts,
            bin_faces,
        }
    }

    pub fn size(&self) -> ImageSize {
        self.size
    }

    pub fn projected(&self) -> &[Vector2<f64>] {
        &self.points
    }

    pub fn vertex_depths(&self) -> &[f64] {
        &self.depths
    }

    /// Barycentric coordinates of `p` in face `f` when `p` lies inside it.
    pub fn locate(&self, face: usize, p: &Vector2<f64>) -> Option<[f64; 3]> {
        let [a, b, c] = self.faces[face].map(|i| self.points[i as usize]);
        let area = cross(&(b - a), &(c - a));
        if area.abs() < MIN_AREA {
            return None;
        }
        let l0 = cross(&(b - p), &(c - p)) / area;
        let l1 = cross(&(c - p), &(a - p)) / area;
        let l2 = 1.0 - l0 - l1;
        let tol = -INSIDE_TOLERANCE;
        (l0 >= tol && l1 >= tol && l2 >= tol).then_some([l0, l1, l2])
    }

    /// Front-most surface covering `p`, if any.
    pub fn front_at(&self, p: &Vector2<f64>) -> Option<SurfaceHit> {
        if !self.size.contains(p) {
            return None;
        }
        let cell = p.y.floor() as usize * self.size.width + p.x.floor() as usize;
        let (s, e) = (self.bin_start[cell] as usize, self.bin_start[cell + 1] as usize);
        let mut best: Option<SurfaceHit> = None;
        for &fi in &self.bin_faces[s..e] {
            let fi = fi as usize;
            if let Some(bary) = self.locate(fi, p) {
                let depth = self.faces[fi]
                    .iter()
                    .zip(bary)
                    .map(|(&v, l)| self.depths[v as usize] * l)
                    .sum::<f64>();
                if best.is_none_or(|b| depth < b.depth) {
                    best = Some(SurfaceHit {
                        face: fi,
                        depth,
                        barycentric: bary,
                    });
                }
            }
        }
        best
    }

    /// True when nothing in front of `depth` (beyond `epsilon`) covers `p`.
    pub fn unoccluded(&self, p: &Vector2<f64>, depth: f64, epsilon: f64) -> bool {
        self.front_at(p).is_none_or(|hit| hit.depth >= depth - epsilon)
    }
}

pub(crate) fn cross(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}
