//! Antipodal grasp sampling oracle and the aerial feasibility filter.

use nalgebra::{Matrix3, SymmetricEigen, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Pose, SpatialIndex};

/// Minimum object points accepted by the sampler.
pub const MIN_OBJECT_POINTS: usize = 10;
const NORMAL_NEIGHBORS: usize = 10;
const PAIR_ATTEMPTS: usize = 8;

/// A 6-DoF parallel-jaw grasp. Gripper frame: approach along local +x,
/// jaws close along local +y.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspCandidate {
    /// Grasp center, world frame.
    pub t: Vector3<f64>,
    pub rotation: UnitQuaternion<f64>,
    /// Jaw opening, meters.
    pub width: f64,
    /// Antipodal quality in [0, 1].
    pub score: f64,
    /// Score after the stability penalty.
    pub s_final: f64,
    /// Image anchor `(u, v)` of the first contact.
    pub pixel: [u32; 2],
}

impl GraspCandidate {
    pub fn approach(&self) -> Vector3<f64> {
        self.rotation * Vector3::x()
    }

    pub fn closing(&self) -> Vector3<f64> {
        self.rotation * Vector3::y()
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.t, self.rotation)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraspParams {
    pub n_candidates: usize,
    /// Stability penalty strength, 1/m.
    pub alpha: f64,
    /// Half-angle of the retained cone about gravity, degrees.
    pub gravity_cone_deg: f64,
    /// Maximum jaw opening, meters.
    pub w_max: f64,
    /// Clearance added to the contact distance, meters.
    pub width_margin: f64,
    /// Largest tilt of the approach away from straight down, degrees.
    pub approach_spread_deg: f64,
    /// Lateral tolerance when searching for the opposing contact, meters.
    pub pair_tolerance: f64,
}

impl Default for GraspParams {
    fn default() -> Self {
        Self {
            n_candidates: 64,
            alpha: 1.5,
            gravity_cone_deg: 100.0,
            w_max: 0.10,
            width_margin: 0.005,
            approach_spread_deg: 75.0,
            pair_tolerance: 0.006,
        }
    }
}

impl GraspParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.n_candidates >= 1
            && self.alpha >= 0.0
            && (0.0..=180.0).contains(&self.gravity_cone_deg)
            && self.w_max > 0.0
            && self.width_margin >= 0.0
            && (0.0..=180.0).contains(&self.approach_spread_deg)
            && self.pair_tolerance > 0.0;
        if !ok {
            return Err(Error::InvalidConfig(format!("grasp parameters out of range: {self:?}")));
        }
        Ok(())
    }
}

/// Ranked candidates that passed the gravity filter.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeasibleGraspSet {
    pub candidates: Vec<GraspCandidate>,
    /// Mean of the object points.
    pub c_obj: Vector3<f64>,
}

impl FeasibleGraspSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Outward unit normals from a plane fit over each point's nearest neighbors.
pub fn estimate_normals(points: &[Vector3<f64>], index: &SpatialIndex) -> Vec<Vector3<f64>> {
    let centroid = points.iter().sum::<Vector3<f64>>() / points.len().max(1) as f64;
    points
        .iter()
        .map(|p| {
            let nb = index.nearest(p, NORMAL_NEIGHBORS);
            let mean = nb.iter().map(|&i| points[i as usize]).sum::<Vector3<f64>>() / nb.len() as f64;
            let mut cov = Matrix3::zeros();
            for &i in &nb {
                let d = points[i as usize] - mean;
                cov += d * d.transpose();
            }
            let eig = SymmetricEigen::new(cov);
            let k = eig.eigenvalues.imin();
            let mut n: Vector3<f64> = eig.eigenvectors.column(k).into_owned();
            if n.norm() < 1e-12 {
                n = (p - centroid).try_normalize(1e-12).unwrap_or_else(Vector3::z);
            }
            n.normalize_mut();
            if n.dot(&(p - centroid)) < 0.0 {
                n = -n;
            }
            n
        })
        .collect()
}

fn antipodal_score(n1: &Vector3<f64>, n2: &Vector3<f64>, u: &Vector3<f64>) -> f64 {
    (-n1.dot(n2)).max(0.0).min(n1.dot(u).abs()).min(n2.dot(u).abs()).clamp(0.0, 1.0)
}

/// Gripper rotation closing along `closing`, approaching along the most
/// prior-aligned perpendicular direction tilted by `beta` about the closing axis.
fn grasp_rotation(closing: &Vector3<f64>, prior: &Vector3<f64>, beta: f64) -> UnitQuaternion<f64> {
    let u = closing.normalize();
    let mut a = prior - u * prior.dot(&u);
    if a.norm() < 1e-9 {
        // Closing axis along the prior: any perpendicular will do.
        let helper = if u.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        a = helper - u * helper.dot(&u);
    }
    let a0 = a.normalize();
    let a = UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_unchecked(u), beta) * a0;
    let z = a.cross(&u);
    let m = Matrix3::from_columns(&[a, u, z]);
    UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(m))
}

/// Samples `n` antipodal grasps from an object point set. `prior` is the
/// preferred approach direction (world down for the tabletop-trained oracle).
pub fn sample_candidates(
    object: &PointCloud,
    n: usize,
    seed: u64,
    params: &GraspParams,
    prior: &Vector3<f64>,
) -> Result<Vec<GraspCandidate>> {
    let pts = &object.points;
    if pts.len() < MIN_OBJECT_POINTS {
        return Err(Error::InsufficientInput(format!(
            "grasp sampling needs at least {MIN_OBJECT_POINTS} object points, got {}",
            pts.len()
        )));
    }
    let index = SpatialIndex::build(pts);
    let normals = estimate_normals(pts, &index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spread = params.approach_spread_deg.to_radians();
    let anchor = |i: usize| object.pixel(i).unwrap_or([i as u32, 0]);
    let mut near = Vec::new();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        // (score, p1 index, p2 index)
        let mut best: Option<(f64, usize, usize)> = None;
        let mut first = None;
        for _ in 0..PAIR_ATTEMPTS {
            let i = rng.gen_range(0..pts.len());
            first.get_or_insert(i);
            let p1 = pts[i];
            let n1 = normals[i];
            near.clear();
            index.radius_query_into(&p1, params.w_max, &mut near);
            near.sort_unstable();
            for &j in &near {
                let j = j as usize;
                let d = pts[j] - p1;
                let along = -d.dot(&n1);
                if along < 0.01 || along > params.w_max {
                    continue;
                }
                if (d + n1 * along).norm() > params.pair_tolerance {
                    continue;
                }
                let dist = d.norm();
                let s = antipodal_score(&n1, &normals[j], &(d / dist));
                if best.is_none_or(|(b, _, _)| s > b) {
                    best = Some((s, i, j));
                }
            }
        }
        let beta = rng.gen_range(-spread..=spread);
        let cand = match best {
            Some((s, i, j)) => {
                let d = pts[j] - pts[i];
                let dist = d.norm();
                GraspCandidate {
                    t: (pts[i] + pts[j]) * 0.5,
                    rotation: grasp_rotation(&d, prior, beta),
                    width: (dist + params.width_margin).min(params.w_max),
                    score: s,
                    s_final: s,
                    pixel: anchor(i),
                }
            }
            None => {
                let i = first.expect("at least one attempt");
                GraspCandidate {
                    t: pts[i],
                    rotation: grasp_rotation(&normals[i], prior, beta),
                    width: params.w_max,
                    score: 0.0,
                    s_final: 0.0,
                    pixel: anchor(i),
                }
            }
        };
        out.push(cand);
    }
    Ok(out)
}

/// Keeps candidates whose approach axis lies within `cone_half_angle` of
/// gravity (boundary inclusive).
pub fn gravity_filter(candidates: &[GraspCandidate], gravity: &Vector3<f64>, cone_half_angle: f64) -> Vec<GraspCandidate> {
    let g = gravity.normalize();
    let cos_limit = cone_half_angle.cos();
    candidates
        .iter()
        .filter(|c| {
            let cos = c.approach().dot(&g).clamp(-1.0, 1.0);
            // Exact comparison against the angle near the boundary, where
            // cosine rounding would decide the outcome.
            cos >= cos_limit || cos.acos() <= cone_half_angle
        })
        .copied()
        .collect()
}

/// Stability-aware score `s·exp(−alpha·‖t − c_obj‖)`.
pub fn stability_score(s: f64, t: &Vector3<f64>, c_obj: &Vector3<f64>, alpha: f64) -> f64 {
    s * (-alpha * (t - c_obj).norm()).exp()
}

/// Filters, rescores and ranks candidates: s_final descending, ties by
/// row-major pixel anchor.
pub fn rank_feasible(
    candidates: &[GraspCandidate],
    gravity: &Vector3<f64>,
    c_obj: Vector3<f64>,
    params: &GraspParams,
) -> FeasibleGraspSet {
    let mut kept = gravity_filter(candidates, gravity, params.gravity_cone_deg.to_radians());
    for c in &mut kept {
        c.s_final = stability_score(c.score, &c.t, &c_obj, params.alpha);
    }
    kept.sort_by(|a, b| {
        b.s_final
            .total_cmp(&a.s_final)
            .then(a.pixel[1].cmp(&b.pixel[1]))
            .then(a.pixel[0].cmp(&b.pixel[0]))
    });
    FeasibleGraspSet {
        candidates: kept,
        c_obj,
    }
}

/// Sample, gravity-filter, rescore and rank.
pub fn build_feasible_set(
    object: &PointCloud,
    gravity: &Vector3<f64>,
    params: &GraspParams,
    seed: u64,
) -> Result<FeasibleGraspSet> {
    let raw = sample_candidates(object, params.n_candidates, seed, params, &-Vector3::z())?;
    let c_obj = object.centroid().expect("sampler checked the point count");
    Ok(rank_feasible(&raw, gravity, c_obj, params))
}
