//! Trajectory discretization, two-stage point-cloud collision evaluation
//! and execution scoring over a batch of grasp candidates.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ConvexHull, Pose, SpatialIndex, HULL_EPS};
use crate::grasp::{FeasibleGraspSet, GraspCandidate};
use crate::kinematics::{base_pose_for_grasp, link_frames, ArmModel, Placement, RobotState};

/// Frame a robot hull is attached to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HullFrame {
    Base,
    /// Joint frame `k` (0-based) of the arm chain.
    Joint(usize),
    EndEffector,
}

/// Convex decomposition of the vehicle and arm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotHullModel {
    pub hulls: Vec<(HullFrame, ConvexHull)>,
}

fn bounds(lo: [f64; 3], hi: [f64; 3]) -> ConvexHull {
    ConvexHull::from_bounds(lo.into(), hi.into()).expect("non-degenerate box")
}

impl RobotHullModel {
    /// Vehicle body box plus link, palm and open-finger boxes sized for `arm`.
    pub fn for_arm(arm: &ArmModel) -> Self {
        Self::padded(arm, 0.0)
    }

    /// [`RobotHullModel::for_arm`] with every box grown by `pad` on each side.
    pub fn padded(arm: &ArmModel, pad: f64) -> Self {
        let bounds = |lo: [f64; 3], hi: [f64; 3]| bounds(lo.map(|v| v - pad), hi.map(|v| v + pad));
        let [l1, l2, l3, _] = arm.link_lengths;
        let body_half_h = 0.05;
        let hulls = vec![
            (HullFrame::Base, bounds([-0.28, -0.28, -body_half_h], [0.28, 0.28, body_half_h])),
            (
                HullFrame::Joint(0),
                bounds([-0.025, -0.025, -l1], [0.025, 0.025, (arm.mount_offset - body_half_h + 0.02).max(0.0)]),
            ),
            (HullFrame::Joint(1), bounds([-0.02, -0.02, -l2], [0.02, 0.02, 0.0])),
            (HullFrame::Joint(2), bounds([-0.02, -0.02, -l3], [0.02, 0.02, 0.0])),
            (HullFrame::EndEffector, bounds([-0.08, -0.06, -0.02], [-0.035, 0.06, 0.02])),
            (HullFrame::EndEffector, bounds([-0.035, 0.05, -0.012], [0.015, 0.065, 0.012])),
            (HullFrame::EndEffector, bounds([-0.035, -0.065, -0.012], [0.015, -0.05, 0.012])),
        ];
        Self { hulls }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hulls.is_empty() {
            return Err(Error::InvalidConfig("robot hull model is empty".into()));
        }
        Ok(())
    }
}

impl Default for RobotHullModel {
    fn default() -> Self {
        Self::for_arm(&ArmModel::default())
    }
}

/// Frame poses of `state`: base, four joint frames, end effector.
fn frames(state: &RobotState, arm: &ArmModel) -> ([Pose; 5], Pose) {
    (link_frames(&state.q, &state.base, arm), state.base)
}

/// World-frame robot hulls at `state`.
pub fn hulls_at(state: &RobotState, model: &RobotHullModel, arm: &ArmModel) -> Vec<ConvexHull> {
    let (links, base) = frames(state, arm);
    model
        .hulls
        .iter()
        .map(|(frame, h)| {
            let pose = match frame {
                HullFrame::Base => base,
                HullFrame::Joint(k) => links[*k],
                HullFrame::EndEffector => links[4],
            };
            h.transformed(&pose)
        })
        .collect()
}

/// Conservative bounding radius about the base position.
pub fn waypoint_radius(state: &RobotState, hulls: &[ConvexHull]) -> f64 {
    let b = state.base.translation;
    hulls
        .iter()
        .map(|h| (h.centroid() - b).norm() + h.circumradius())
        .fold(0.0, f64::max)
        + HULL_EPS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub waypoints: Vec<RobotState>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }
}

/// `s` waypoints from `start` to `target`: linear translation and joints,
/// slerp rotation, exact endpoints.
pub fn interpolate(start: &RobotState, target: &RobotState, s: usize) -> Result<Trajectory> {
    if s < 2 {
        return Err(Error::InsufficientInput(format!("trajectory needs at least 2 waypoints, got {s}")));
    }
    let last = (s - 1) as f64;
    let waypoints = (0..s)
        .map(|i| match i {
            0 => *start,
            _ if i == s - 1 => *target,
            _ => start.interpolate(target, i as f64 / last),
        })
        .collect();
    Ok(Trajectory { waypoints })
}

/// Scene points within the padded bounding box of any robot hull at each
/// waypoint (sorted, deduplicated indices). An empty set certifies that
/// waypoint collision-free.
pub fn coarse_filter(traj: &Trajectory, index: &SpatialIndex, model: &RobotHullModel, arm: &ArmModel) -> Vec<Vec<u32>> {
    traj.waypoints
        .iter()
        .map(|w| {
            let mut local = Vec::new();
            for h in &hulls_at(w, model, arm) {
                hull_query(index, h, &mut local);
            }
            local.sort_unstable();
            local.dedup();
            local
        })
        .collect()
}

fn hull_query(index: &SpatialIndex, h: &ConvexHull, out: &mut Vec<u32>) {
    let (lo, hi) = h.aabb();
    let pad = Vector3::repeat(HULL_EPS);
    index.box_query_into(&(lo - pad), &(hi + pad), out);
}

/// Center and radius of a conservative sphere around each hull.
fn bounding_spheres(hulls: &[ConvexHull]) -> Vec<(Vector3<f64>, f64)> {
    hulls.iter().map(|h| (h.centroid(), h.circumradius() + HULL_EPS)).collect()
}

/// True when `p` lies strictly inside any hull; bounding spheres reject
/// distant hulls before the plane tests.
fn inside_any(p: &Vector3<f64>, hulls: &[ConvexHull], spheres: &[(Vector3<f64>, f64)]) -> bool {
    hulls
        .iter()
        .zip(spheres)
        .any(|(h, (c, r2))| (p - c).norm_squared() <= *r2 && h.contains(p))
}

fn spheres(hulls: &[ConvexHull]) -> Vec<(Vector3<f64>, f64)> {
    bounding_spheres(hulls).into_iter().map(|(c, r)| (c, r * r)).collect()
}

/// Penetration count: for every waypoint, the number of points from its
/// local set strictly inside the union of robot hulls.
pub fn collision_penalty(
    traj: &Trajectory,
    local_sets: &[Vec<u32>],
    points: &[Vector3<f64>],
    model: &RobotHullModel,
    arm: &ArmModel,
) -> u64 {
    traj.waypoints
        .iter()
        .zip(local_sets)
        .map(|(w, local)| {
            if local.is_empty() {
                return 0;
            }
            let hulls = hulls_at(w, model, arm);
            let sph = spheres(&hulls);
            local
                .iter()
                .filter(|&&i| inside_any(&points[i as usize], &hulls, &sph))
                .count() as u64
        })
        .sum()
}

/// Execution score `v·max(0, 1 − λ·n)`.
pub fn execution_score(v: f64, n: u64, lambda: f64) -> f64 {
    v * (1.0 - lambda * n as f64).max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionBackend {
    /// KD-tree sphere filter, then exact half-space tests.
    #[default]
    TwoStage,
    /// Every point against every hull at every waypoint.
    BruteForce,
    /// Kinematic-only: penalties are not computed.
    Disabled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollisionParams {
    /// Waypoints per trajectory.
    #[serde(rename = "S", alias = "waypoints")]
    pub waypoints: usize,
    pub lambda: f64,
    /// Points within `width + target_exclusion_m` of the object centroid are
    /// ignored; a negative value disables the radius rule.
    pub target_exclusion_m: f64,
    pub backend: CollisionBackend,
}

impl Default for CollisionParams {
    fn default() -> Self {
        Self {
            waypoints: 20,
            lambda: 0.02,
            target_exclusion_m: 0.02,
            backend: CollisionBackend::TwoStage,
        }
    }
}

impl CollisionParams {
    pub fn validate(&self) -> Result<()> {
        if self.waypoints < 2 || !(self.lambda >= 0.0) || !self.target_exclusion_m.is_finite() {
            return Err(Error::InvalidConfig(format!("collision parameters out of range: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredGrasp {
    pub candidate: GraspCandidate,
    pub target: RobotState,
    pub trajectory: Trajectory,
    /// Penetrating point count.
    pub penalty: u64,
    /// Visual quality score (the stability-aware score).
    pub v_k: f64,
    /// Execution score.
    pub score: f64,
}

/// Read-only inputs shared by every candidate of one evaluation cycle.
pub struct CollisionWorld<'a> {
    pub points: &'a [Vector3<f64>],
    pub index: &'a SpatialIndex,
}

impl<'a> CollisionWorld<'a> {
    pub fn new(points: &'a [Vector3<f64>], index: &'a SpatialIndex) -> Self {
        Self { points, index }
    }
}

fn penalty_for(
    traj: &Trajectory,
    world: &CollisionWorld,
    model: &RobotHullModel,
    arm: &ArmModel,
    backend: CollisionBackend,
    exclude: Option<(Vector3<f64>, f64)>,
) -> u64 {
    let keep = |p: &Vector3<f64>| exclude.is_none_or(|(c, r)| (p - c).norm_squared() > r * r);
    let mut local = Vec::new();
    let mut total = 0;
    for w in &traj.waypoints {
        let hulls = hulls_at(w, model, arm);
        match backend {
            CollisionBackend::Disabled => return 0,
            CollisionBackend::TwoStage => {
                // Each point is charged to the first hull that contains it,
                // so points inside overlapping hulls count once.
                let sph = spheres(&hulls);
                for (j, h) in hulls.iter().enumerate() {
                    local.clear();
                    hull_query(world.index, h, &mut local);
                    total += local
                        .iter()
                        .map(|&i| &world.points[i as usize])
                        .filter(|p| {
                            keep(p) && h.contains(p) && !inside_any(p, &hulls[..j], &sph[..j])
                        })
                        .count() as u64;
                }
            }
            CollisionBackend::BruteForce => {
                total += world
                    .points
                    .iter()
                    .filter(|p| keep(p) && hulls.iter().any(|h| h.contains(p)))
                    .count() as u64;
            }
        }
    }
    total
}

/// Scores one candidate, or `None` when no in-limit arm solution exists.
pub fn evaluate_candidate(
    g: &GraspCandidate,
    c_obj: &Vector3<f64>,
    current: &RobotState,
    world: &CollisionWorld,
    params: &CollisionParams,
    arm: &ArmModel,
    model: &RobotHullModel,
    placement: &Placement,
) -> Option<ScoredGrasp> {
    let target = base_pose_for_grasp(g, arm, placement)?;
    let trajectory = interpolate(current, &target, params.waypoints).ok()?;
    let exclude = (params.target_exclusion_m >= 0.0).then(|| (*c_obj, g.width + params.target_exclusion_m));
    let penalty = penalty_for(&trajectory, world, model, arm, params.backend, exclude);
    let v_k = g.s_final;
    Some(ScoredGrasp {
        candidate: *g,
        target,
        trajectory,
        penalty,
        v_k,
        score: execution_score(v_k, penalty, params.lambda),
    })
}

/// Scores every candidate in parallel, keeping input order and dropping
/// IK-infeasible ones.
pub fn evaluate_batch(
    set: &FeasibleGraspSet,
    current: &RobotState,
    world: &CollisionWorld,
    params: &CollisionParams,
    arm: &ArmModel,
    model: &RobotHullModel,
    placement: &Placement,
) -> Vec<ScoredGrasp> {
    set.candidates
        .par_iter()
        .map(|g| evaluate_candidate(g, &set.c_obj, current, world, params, arm, model, placement))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}
