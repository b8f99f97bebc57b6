use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::collision::{hulls_at, interpolate, RobotHullModel, ScoredGrasp};
use crate::geometry::ConvexHull;
use crate::grasp::{stability_score, GraspParams};
use crate::kinematics::{forward_kinematics_unchecked, ArmModel, RobotState};
use crate::scene::{Scene, SceneObject};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionOutcome {
    Lifted,
    Collided,
    Missed,
}

/// Phase in which a ground-truth contact occurred.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactPhase {
    Approach,
    Lift,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub outcome: ExecutionOutcome,
    /// Object id hit first, with the phase; clutter contacts carry `None`.
    pub contact: Option<(Option<u32>, ContactPhase)>,
    /// Fine waypoints replayed before stopping.
    pub waypoints_checked: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutionParams {
    /// Fine interpolation factor over the planned waypoint count.
    pub refine: usize,
    /// Vertical lift after closing, meters.
    pub lift_height: f64,
    /// Collision-checked steps along the lift.
    pub lift_steps: usize,
}

impl Default for ExecutionParams {
    fn default() -> Self {
        Self {
            refine: 4,
            lift_height: 0.3,
            lift_steps: 10,
        }
    }
}

/// First ground-truth contact of the robot at `state` with any non-target
/// geometry. Returns the object id (`None` for clutter points).
fn contact(state: &RobotState, scene: &Scene, model: &RobotHullModel, arm: &ArmModel) -> Option<Option<u32>> {
    let robot = hulls_at(state, model, arm);
    for obj in scene.objects.iter().filter(|o| !o.is_target) {
        for h in &obj.hulls {
            if robot.iter().any(|r| r.intersects(h)) {
                return Some(Some(obj.id));
            }
        }
    }
    let hit = scene.clutter.points.iter().any(|p| robot.iter().any(|r| r.contains(p)));
    hit.then_some(None)
}

/// Closure test at the final pose: the jaw segment (length `width` along the
/// realized closing axis) crosses the target, and the grasp center lies
/// within half the target's smallest extent of its surface.
pub fn closure_test(state: &RobotState, width: f64, target: &SceneObject, arm: &ArmModel) -> bool {
    let ee = forward_kinematics_unchecked(&state.q, &state.base, arm);
    let c = ee.translation;
    let y = ee.transform_vector(&Vector3::y());
    let a = c - y * (0.5 * width);
    let b = c + y * (0.5 * width);
    let crosses = target.hulls.iter().any(|h| h.intersects_segment(&a, &b));
    let dist = target
        .hulls
        .iter()
        .map(|h| h.surface_distance(&c))
        .fold(f64::INFINITY, f64::min);
    let extent = target.hulls.iter().map(ConvexHull::min_width).fold(f64::INFINITY, f64::min);
    crosses && dist <= 0.5 * extent
}

/// Kinematic playback of an executed grasp against ground-truth geometry
/// (the target itself excluded): approach at `refine × S` waypoints, closure
/// test, then a vertical lift.
pub fn simulate_execution(
    grasp: &ScoredGrasp,
    scene: &Scene,
    arm: &ArmModel,
    model: &RobotHullModel,
    params: &ExecutionParams,
) -> ExecutionReport {
    let wps = &grasp.trajectory.waypoints;
    let (first, last) = (wps[0], wps[wps.len() - 1]);
    let fine = interpolate(&first, &last, (wps.len() * params.refine.max(1)).max(2)).expect("at least two waypoints");
    for (i, w) in fine.waypoints.iter().enumerate() {
        if let Some(id) = contact(w, scene, model, arm) {
            return ExecutionReport {
                outcome: ExecutionOutcome::Collided,
                contact: Some((id, ContactPhase::Approach)),
                waypoints_checked: i + 1,
            };
        }
    }
    let mut checked = fine.len();
    if !closure_test(&last, grasp.candidate.width, scene.target(), arm) {
        return ExecutionReport {
            outcome: ExecutionOutcome::Missed,
            contact: None,
            waypoints_checked: checked,
        };
    }
    let steps = params.lift_steps.max(1);
    for k in 1..=steps {
        let mut s = last;
        s.base.translation.z += params.lift_height * k as f64 / steps as f64;
        checked += 1;
        if let Some(id) = contact(&s, scene, model, arm) {
            return ExecutionReport {
                outcome: ExecutionOutcome::Collided,
                contact: Some((id, ContactPhase::Lift)),
                waypoints_checked: checked,
            };
        }
    }
    ExecutionReport {
        outcome: ExecutionOutcome::Lifted,
        contact: None,
        waypoints_checked: checked,
    }
}

/// Outward normal of the face of `obj` that `p` lies on.
fn surface_normal(obj: &SceneObject, p: &Vector3<f64>) -> Vector3<f64> {
    let mut best = (f64::NEG_INFINITY, Vector3::z());
    for h in &obj.hulls {
        for (n, d) in h.normals().iter().zip(h.offsets()) {
            let v = n.dot(p) - d;
            if v > best.0 {
                best = (v, *n);
            }
        }
    }
    best.1
}

/// Ground-truth grasp center: exhaustive search over pairs of noiseless
/// surface samples of the target for the highest stability-weighted
/// antipodal score.
pub fn ground_truth_grasp_center(scene: &Scene, params: &GraspParams, spacing: f64) -> Vector3<f64> {
    let target = scene.target();
    let pts = target.surface_points(spacing);
    if pts.is_empty() {
        return target.centroid();
    }
    let normals: Vec<Vector3<f64>> = pts.iter().map(|p| surface_normal(target, p)).collect();
    let c = pts.iter().sum::<Vector3<f64>>() / pts.len() as f64;
    let mut best = (f64::NEG_INFINITY, c);
    for (i, p1) in pts.iter().enumerate() {
        let n1 = normals[i];
        for (j, p2) in pts.iter().enumerate() {
            if i == j {
                continue;
            }
            let d = p2 - p1;
            let dist = d.norm();
            if !(0.01..=params.w_max).contains(&dist) {
                continue;
            }
            let u = d / dist;
            let n2 = normals[j];
            let s = (-n1.dot(&n2)).max(0.0).min(n1.dot(&u).abs()).min(n2.dot(&u).abs());
            let t = (p1 + p2) * 0.5;
            let v = stability_score(s, &t, &c, params.alpha);
            if v > best.0 {
                best = (v, t);
            }
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::{CollisionParams, Trajectory};
    use crate::geometry::{PointCloud, Pose};
    use crate::grasp::GraspCandidate;
    use crate::kinematics::{base_pose_for_grasp, Placement};
    use crate::scene::CameraModel;
    use nalgebra::{Matrix3, Rotation3, UnitQuaternion};

    fn boxed(id: u32, label: &str, lo: [f64; 3], hi: [f64; 3], target: bool) -> SceneObject {
        SceneObject {
            id,
            label: label.into(),
            hulls: vec![ConvexHull::from_bounds(lo.into(), hi.into()).unwrap()],
            is_target: target,
            is_context: !target,
        }
    }

    fn scene(extra: Vec<SceneObject>) -> Scene {
        let mut objects = vec![
            boxed(1, "table", [-0.6, -0.4, 0.71], [0.6, 0.4, 0.75], false),
            boxed(2, "box", [-0.03, -0.03, 0.75], [0.03, 0.03, 0.87], true),
        ];
        objects.extend(extra);
        Scene::new(objects, PointCloud::default(), -Vector3::z(), CameraModel::default(), Pose::identity()).unwrap()
    }

    fn top_down(t: Vector3<f64>) -> GraspCandidate {
        let a = -Vector3::z();
        let c = Vector3::x();
        GraspCandidate {
            t,
            rotation: UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[
                a,
                c,
                a.cross(&c),
            ]))),
            width: 0.065,
            score: 0.9,
            s_final: 0.9,
            pixel: [0, 0],
        }
    }

    fn plan(g: GraspCandidate, start: RobotState) -> ScoredGrasp {
        let arm = ArmModel::default();
        let target = base_pose_for_grasp(&g, &arm, &Placement::default()).unwrap();
        ScoredGrasp {
            candidate: g,
            target,
            trajectory: interpolate(&start, &target, CollisionParams::default().waypoints).unwrap(),
            penalty: 0,
            v_k: g.s_final,
            score: g.s_final,
        }
    }

    fn start() -> RobotState {
        RobotState::hover(Vector3::new(-0.8, 0.0, 1.7), 0.0, ArmModel::default().stowed())
    }

    #[test]
    fn clean_grasp_lifts() {
        let s = scene(vec![]);
        let g = plan(top_down(Vector3::new(0.0, 0.0, 0.83)), start());
        let r = simulate_execution(&g, &s, &ArmModel::default(), &RobotHullModel::default(), &ExecutionParams::default());
        assert_eq!(r.outcome, ExecutionOutcome::Lifted, "{r:?}");
    }

    #[test]
    fn wall_in_path_collides() {
        let wall = boxed(3, "wall", [-0.45, -1.0, 0.75], [-0.4, 1.0, 2.5], false);
        let s = scene(vec![wall]);
        let g = plan(top_down(Vector3::new(0.0, 0.0, 0.83)), start());
        let r = simulate_execution(&g, &s, &ArmModel::default(), &RobotHullModel::default(), &ExecutionParams::default());
        assert_eq!(r.outcome, ExecutionOutcome::Collided);
        assert_eq!(r.contact, Some((Some(3), ContactPhase::Approach)));
    }

    #[test]
    fn distant_grasp_misses() {
        let s = scene(vec![]);
        let g = plan(top_down(Vector3::new(0.3, 0.3, 1.3)), start());
        let r = simulate_execution(&g, &s, &ArmModel::default(), &RobotHullModel::default(), &ExecutionParams::default());
        assert_eq!(r.outcome, ExecutionOutcome::Missed);
    }

    #[test]
    fn overhang_blocks_lift() {
        let shelf = boxed(3, "shelf", [-0.5, -0.5, 1.52], [0.5, 0.5, 1.56], false);
        let s = scene(vec![shelf]);
        let g = plan(top_down(Vector3::new(0.0, 0.0, 0.83)), start());
        // Start under the overhang so the approach itself is clear.
        let mut g2 = g.clone();
        let first = RobotState {
            base: Pose::from_yaw(g.target.base.translation + Vector3::new(-0.05, 0.0, 0.0), g.target.base.yaw()),
            q: g.target.q,
        };
        g2.trajectory = Trajectory {
            waypoints: vec![first, g.target],
        };
        let r = simulate_execution(&g2, &s, &ArmModel::default(), &RobotHullModel::default(), &ExecutionParams::default());
        assert_eq!(r.outcome, ExecutionOutcome::Collided);
        assert_eq!(r.contact.unwrap().1, ContactPhase::Lift);
    }

    #[test]
    fn ground_truth_center_of_box() {
        let s = scene(vec![]);
        let c = ground_truth_grasp_center(&s, &GraspParams::default(), 0.01);
        assert!((c - Vector3::new(0.0, 0.0, 0.81)).norm() < 0.006, "{c:?}");
    }
}
