use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::Pose;
use crate::error::{Error, Result};

/// Interior margin on `n·p − d`. Points on a face count as outside.
pub const HULL_EPS: f64 = 1e-9;

/// Convex polytope stored as half-spaces `{x : n_i·x ≤ d_i}`.
///
/// The generating boundary vertices and unique edge directions are kept
/// alongside the planes; they feed the separating-axis test and surface
/// sampling. Redundant coplanar half-spaces are tolerated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexHull {
    normals: Vec<Vector3<f64>>,
    offsets: Vec<f64>,
    centroid: Vector3<f64>,
    circumradius: f64,
    vertices: Vec<Vector3<f64>>,
    edge_dirs: Vec<Vector3<f64>>,
}

impl ConvexHull {
    /// Builds the hull of a point set by exhaustive supporting-plane search.
    ///
    /// Every triple spanning a plane with all points on one side yields a
    /// face. O(n⁴), intended for the small vertex sets used to model robot
    /// parts and scene objects.
    pub fn from_vertices(input: &[Vector3<f64>]) -> Result<Self> {
        if input.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::DegenerateGeometry("non-finite vertex".into()));
        }
        let mut pts: Vec<Vector3<f64>> = Vec::with_capacity(input.len());
        for v in input {
            if !pts.iter().any(|q| (q - v).norm() < 1e-12) {
                pts.push(*v);
            }
        }
        if pts.len() < 4 {
            return Err(Error::DegenerateGeometry(format!(
                "need at least 4 distinct vertices, got {}",
                pts.len()
            )));
        }
        let mean = pts.iter().sum::<Vector3<f64>>() / pts.len() as f64;
        let scale = pts.iter().map(|p| (p - mean).norm()).fold(0.0, f64::max);
        if scale < 1e-12 {
            return Err(Error::DegenerateGeometry("vertices coincide".into()));
        }
        let tol = 1e-9 * scale.max(1.0);
        let area_tol = 1e-12 * scale * scale;

        let n = pts.len();
        let mut normals: Vec<Vector3<f64>> = Vec::new();
        let mut offsets: Vec<f64> = Vec::new();
        let mut any_plane = false;
        let push_plane = |normal: Vector3<f64>, normals: &mut Vec<Vector3<f64>>, offsets: &mut Vec<f64>| {
            let d = pts.iter().map(|p| normal.dot(p)).fold(f64::NEG_INFINITY, f64::max);
            let dup = normals
                .iter()
                .zip(offsets.iter())
                .any(|(m, e)| m.dot(&normal) > 1.0 - 1e-10 && (e - d).abs() < tol);
            if !dup {
                normals.push(normal);
                offsets.push(d);
            }
        };
        for i in 0..n {
            for j in (i + 1)..n {
                for k in (j + 1)..n {
                    let cross = (pts[j] - pts[i]).cross(&(pts[k] - pts[i]));
                    let len = cross.norm();
                    if len <= area_tol {
                        continue;
                    }
                    any_plane = true;
                    let normal = cross / len;
                    let d0 = normal.dot(&pts[i]);
                    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                    for p in &pts {
                        let s = normal.dot(p) - d0;
                        lo = lo.min(s);
                        hi = hi.max(s);
                    }
                    if hi - lo <= tol {
                        // All points on this plane.
                        continue;
                    }
                    if hi <= tol {
                        push_plane(normal, &mut normals, &mut offsets);
                    } else if lo >= -tol {
                        push_plane(-normal, &mut normals, &mut offsets);
                    }
                }
            }
        }
        if !any_plane {
            return Err(Error::DegenerateGeometry("vertices are collinear".into()));
        }
        if normals.len() < 4 {
            return Err(Error::DegenerateGeometry("vertices are coplanar".into()));
        }

        // Extreme vertices lie on at least three faces.
        let on_face = |p: &Vector3<f64>, f: usize| (normals[f].dot(p) - offsets[f]).abs() <= tol;
        let vertices: Vec<Vector3<f64>> = pts
            .iter()
            .filter(|p| (0..normals.len()).filter(|&f| on_face(p, f)).count() >= 3)
            .copied()
            .collect();

        let mut edge_dirs: Vec<Vector3<f64>> = Vec::new();
        for a in 0..vertices.len() {
            for b in (a + 1)..vertices.len() {
                let shared = (0..normals.len())
                    .filter(|&f| on_face(&vertices[a], f) && on_face(&vertices[b], f))
                    .count();
                if shared < 2 {
                    continue;
                }
                let dir = (vertices[b] - vertices[a]).normalize();
                if !edge_dirs.iter().any(|e| e.dot(&dir).abs() > 1.0 - 1e-10) {
                    edge_dirs.push(dir);
                }
            }
        }

        let centroid = vertices.iter().sum::<Vector3<f64>>() / vertices.len() as f64;
        let circumradius = vertices
            .iter()
            .map(|v| (v - centroid).norm())
            .fold(0.0, f64::max);
        let hull = Self {
            normals,
            offsets,
            centroid,
            circumradius,
            vertices,
            edge_dirs,
        };
        if hull.max_violation(&hull.centroid) >= -tol {
            return Err(Error::DegenerateGeometry("hull has empty interior".into()));
        }
        Ok(hull)
    }

    /// Axis-aligned box with the given full extents, centered at the origin.
    pub fn cuboid(dims: Vector3<f64>) -> Result<Self> {
        let h = dims * 0.5;
        let mut v = Vec::with_capacity(8);
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for sz in [-1.0, 1.0] {
                    v.push(Vector3::new(sx * h.x, sy * h.y, sz * h.z));
                }
            }
        }
        Self::from_vertices(&v)
    }

    /// Box spanning `[lo, hi]` on each axis.
    pub fn from_bounds(lo: Vector3<f64>, hi: Vector3<f64>) -> Result<Self> {
        let c = (lo + hi) * 0.5;
        Ok(Self::cuboid(hi - lo)?.transformed(&Pose::from_translation(c)))
    }

    /// Regular prism along local z with `sides` faces around, inscribed
    /// circle radius `radius`, centered at the origin.
    pub fn prism(sides: usize, radius: f64, height: f64) -> Result<Self> {
        if sides < 3 {
            return Err(Error::DegenerateGeometry("prism needs at least 3 sides".into()));
        }
        let step = std::f64::consts::TAU / sides as f64;
        let r = radius / (0.5 * step).cos();
        let mut v = Vec::with_capacity(2 * sides);
        for i in 0..sides {
            let a = step * (i as f64 + 0.5);
            for z in [-0.5 * height, 0.5 * height] {
                v.push(Vector3::new(r * a.cos(), r * a.sin(), z));
            }
        }
        Self::from_vertices(&v)
    }

    pub fn normals(&self) -> &[Vector3<f64>] {
        &self.normals
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn centroid(&self) -> Vector3<f64> {
        self.centroid
    }

    pub fn circumradius(&self) -> f64 {
        self.circumradius
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    /// Axis-aligned bounds of the vertices.
    pub fn aabb(&self) -> (Vector3<f64>, Vector3<f64>) {
        self.vertices.iter().fold(
            (Vector3::repeat(f64::INFINITY), Vector3::repeat(f64::NEG_INFINITY)),
            |(lo, hi), v| (lo.inf(v), hi.sup(v)),
        )
    }

    pub fn face_count(&self) -> usize {
        self.normals.len()
    }

    /// `max_i (n_i·p − d_i)`: negative inside, positive outside.
    pub fn max_violation(&self, p: &Vector3<f64>) -> f64 {
        self.normals
            .iter()
            .zip(&self.offsets)
            .map(|(n, d)| n.dot(p) - d)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Strict interior test with the [`HULL_EPS`] margin.
    #[inline]
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        self.normals
            .iter()
            .zip(&self.offsets)
            .all(|(n, d)| n.dot(p) - d < -HULL_EPS)
    }

    /// Rigid transform of the hull. Membership commutes with the pose.
    pub fn transformed(&self, pose: &Pose) -> Self {
        let normals: Vec<_> = self.normals.iter().map(|n| pose.rotation * n).collect();
        let offsets = self
            .offsets
            .iter()
            .zip(&normals)
            .map(|(d, n)| d + n.dot(&pose.translation))
            .collect();
        Self {
            normals,
            offsets,
            centroid: pose.transform_point(&self.centroid),
            circumradius: self.circumradius,
            vertices: self.vertices.iter().map(|v| pose.transform_point(v)).collect(),
            edge_dirs: self.edge_dirs.iter().map(|e| pose.rotation * e).collect(),
        }
    }

    /// Parametric interval `[t_in, t_out]` where `origin + t·dir` lies in the
    /// closed hull, or `None` when the line misses.
    pub fn clip_line(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<(f64, f64)> {
        let (mut t_in, mut t_out) = (f64::NEG_INFINITY, f64::INFINITY);
        for (n, d) in self.normals.iter().zip(&self.offsets) {
            let denom = n.dot(dir);
            let dist = d - n.dot(origin);
            if denom.abs() < 1e-15 {
                if dist < 0.0 {
                    return None;
                }
                continue;
            }
            let t = dist / denom;
            if denom > 0.0 {
                t_out = t_out.min(t);
            } else {
                t_in = t_in.max(t);
            }
            if t_in > t_out {
                return None;
            }
        }
        Some((t_in, t_out))
    }

    /// First non-negative ray parameter hitting the hull.
    pub fn ray_hit(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        let (t_in, t_out) = self.clip_line(origin, dir)?;
        if t_out < 0.0 {
            return None;
        }
        Some(t_in.max(0.0))
    }

    /// True when the segment `a → b` passes through the hull interior.
    pub fn intersects_segment(&self, a: &Vector3<f64>, b: &Vector3<f64>) -> bool {
        let dir = b - a;
        match self.clip_line(a, &dir) {
            Some((t_in, t_out)) => {
                let lo = t_in.max(0.0);
                let hi = t_out.min(1.0);
                hi - lo > 1e-12 && self.contains(&(a + dir * (0.5 * (lo + hi))))
            }
            None => false,
        }
    }

    /// Separating-axis test for interior overlap of two hulls. Touching
    /// hulls (overlap below [`HULL_EPS`]) do not intersect.
    pub fn intersects(&self, other: &ConvexHull) -> bool {
        let dc = (self.centroid - other.centroid).norm();
        if dc >= self.circumradius + other.circumradius {
            return false;
        }
        let separated = |axis: &Vector3<f64>| {
            let (a_lo, a_hi) = project(&self.vertices, axis);
            let (b_lo, b_hi) = project(&other.vertices, axis);
            a_hi - b_lo <= HULL_EPS || b_hi - a_lo <= HULL_EPS
        };
        if self.normals.iter().any(separated) || other.normals.iter().any(separated) {
            return false;
        }
        for ea in &self.edge_dirs {
            for eb in &other.edge_dirs {
                let axis = ea.cross(eb);
                let len = axis.norm();
                if len < 1e-9 {
                    continue;
                }
                if separated(&(axis / len)) {
                    return false;
                }
            }
        }
        true
    }

    /// Closest point of the closed hull to `p` (Dykstra projection onto
    /// the half-space intersection). Returns `p` itself when inside.
    pub fn closest_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        if self.max_violation(p) <= 0.0 {
            return *p;
        }
        let m = self.normals.len();
        let mut x = *p;
        let mut inc = vec![Vector3::zeros(); m];
        for _ in 0..500 {
            let prev = x;
            for i in 0..m {
                let y = x + inc[i];
                let viol = self.normals[i].dot(&y) - self.offsets[i];
                let proj = if viol > 0.0 { y - self.normals[i] * viol } else { y };
                inc[i] = y - proj;
                x = proj;
            }
            if (x - prev).norm() < 1e-12 {
                break;
            }
        }
        x
    }

    /// Euclidean distance from `p` to the hull boundary (zero on a face).
    pub fn surface_distance(&self, p: &Vector3<f64>) -> f64 {
        let v = self.max_violation(p);
        if v <= 0.0 {
            -v
        } else {
            (self.closest_point(p) - p).norm()
        }
    }

    /// Smallest width over the face-normal directions.
    pub fn min_width(&self) -> f64 {
        self.normals
            .iter()
            .map(|n| {
                let (lo, hi) = project(&self.vertices, n);
                hi - lo
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Grid samples on every face at the given spacing (one point per
    /// `spacing²` of area). Faces too small to hold a grid point contribute
    /// their vertex centroid.
    pub fn sample_surface(&self, spacing: f64) -> Vec<Vector3<f64>> {
        let mut out = Vec::new();
        let tol = 1e-9 * self.circumradius.max(1.0);
        for (f, (n, d)) in self.normals.iter().zip(&self.offsets).enumerate() {
            let face: Vec<&Vector3<f64>> = self
                .vertices
                .iter()
                .filter(|v| (n.dot(v) - d).abs() <= tol)
                .collect();
            if face.len() < 3 {
                continue;
            }
            let seed = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
            let e1 = (seed - n * n.dot(&seed)).normalize();
            let e2 = n.cross(&e1);
            let origin = n * *d;
            let (mut lo1, mut hi1, mut lo2, mut hi2) =
                (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
            for v in &face {
                let r = *v - origin;
                lo1 = lo1.min(r.dot(&e1));
                hi1 = hi1.max(r.dot(&e1));
                lo2 = lo2.min(r.dot(&e2));
                hi2 = hi2.max(r.dot(&e2));
            }
            let before = out.len();
            let n1 = ((hi1 - lo1) / spacing).floor() as usize + 1;
            let n2 = ((hi2 - lo2) / spacing).floor() as usize + 1;
            let off1 = 0.5 * ((hi1 - lo1) - (n1 - 1) as f64 * spacing);
            let off2 = 0.5 * ((hi2 - lo2) - (n2 - 1) as f64 * spacing);
            for a in 0..n1 {
                for b in 0..n2 {
                    let s = lo1 + off1 + a as f64 * spacing;
                    let t = lo2 + off2 + b as f64 * spacing;
                    let p = origin + e1 * s + e2 * t;
                    let inside = self
                        .normals
                        .iter()
                        .zip(&self.offsets)
                        .enumerate()
                        .all(|(g, (m, e))| g == f || m.dot(&p) - e <= tol);
                    if inside {
                        out.push(p);
                    }
                }
            }
            if out.len() == before {
                out.push(face.iter().copied().sum::<Vector3<f64>>() / face.len() as f64);
            }
        }
        out
    }
}

fn project(points: &[Vector3<f64>], axis: &Vector3<f64>) -> (f64, f64) {
    points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let s = axis.dot(p);
        (lo.min(s), hi.max(s))
    })
}
