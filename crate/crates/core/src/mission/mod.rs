//! The closed perception/decision loop: search, orbit, grasp evaluation,
//! execute-or-reposition, and simulated execution.

mod execution;
mod map;
mod trace;

use std::time::Instant;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub use execution::{
    closure_test, ground_truth_grasp_center, simulate_execution, ContactPhase, ExecutionOutcome, ExecutionParams,
    ExecutionReport,
};
pub use map::VoxelMap;
pub use trace::{DecisionKind, Episode, EpisodeMeta, EpisodeResult, Outcome, TraceLine, TraceRecord};

use crate::collision::{evaluate_batch, CollisionBackend, CollisionParams, CollisionWorld, RobotHullModel, ScoredGrasp};
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, SpatialIndex};
use crate::grasp::{build_feasible_set, GraspParams};
use crate::guidance::{guidance_step, GuidanceInput, GuidanceMode, GuidanceParams, GuidanceState};
use crate::kinematics::{ArmModel, Placement, RobotState};
use crate::scene::{
    camera_pose, camera_pose_looking_at, mask_centroid, mask_points, parse_instruction, render_depth, segment, Scene,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablation {
    /// Kinematic-only scoring: penalties are never computed.
    pub no_obstacle_awareness: bool,
    /// Freeze the maps and masks after the first grasp evaluation.
    pub open_loop: bool,
    /// Exhaustive per-point collision checks instead of the two-stage test.
    pub brute_force_collision: bool,
}

impl Ablation {
    pub fn name(&self) -> String {
        let mut parts = Vec::new();
        if self.no_obstacle_awareness {
            parts.push("no_obstacle_awareness");
        }
        if self.open_loop {
            parts.push("open_loop");
        }
        if self.brute_force_collision {
            parts.push("brute_force_collision");
        }
        if parts.is_empty() {
            "full".into()
        } else {
            parts.join("+")
        }
    }

    /// Parses a name produced by [`Ablation::name`].
    pub fn from_name(name: &str) -> Result<Self> {
        let mut a = Ablation::default();
        if name == "full" {
            return Ok(a);
        }
        for part in name.split('+') {
            match part.trim() {
                "no_obstacle_awareness" => a.no_obstacle_awareness = true,
                "open_loop" => a.open_loop = true,
                "brute_force_collision" => a.brute_force_collision = true,
                other => return Err(Error::InvalidConfig(format!("unknown ablation '{other}'"))),
            }
        }
        Ok(a)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MissionConfig {
    /// Feasibility threshold on the best execution score.
    pub delta: f64,
    pub tick_hz: f64,
    pub max_ticks: usize,
    /// Ticks between grasp evaluations while repositioning.
    pub reevaluate_every: usize,
    /// Ticks with a non-empty object mask before the first evaluation.
    pub min_views: usize,
    /// Ticks after the context is found without ever seeing the object
    /// before the search is abandoned.
    pub object_search_ticks: usize,
    pub min_mask_pixels: usize,
    /// Voxel edge of the obstacle map, meters.
    pub scene_voxel: f64,
    /// Voxel edge of the target map, meters.
    pub target_voxel: f64,
    /// Target voxels observed fewer times than this fraction of the most
    /// observed one are dropped before grasp synthesis.
    pub target_support: f64,
    /// Obstacle points farther than this from the target are not scored.
    pub map_radius: f64,
    /// Growth of the robot hulls used for planning, meters.
    pub planning_margin: f64,
    /// Camera pitch below the horizon during the yaw scan, degrees.
    pub search_pitch_deg: f64,
    /// Camera mount ahead of the body center, meters.
    pub camera_forward: f64,
    /// Stabilizing hover and gripper closing durations, ticks.
    pub hover_ticks: usize,
    pub close_ticks: usize,
    pub execution: ExecutionParams,
    pub ablation: Ablation,
    pub seed: u64,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            delta: 0.25,
            tick_hz: 20.0,
            max_ticks: 4000,
            reevaluate_every: 10,
            min_views: 40,
            object_search_ticks: 1200,
            min_mask_pixels: crate::scene::DEFAULT_MIN_MASK_PIXELS,
            scene_voxel: 0.02,
            target_voxel: 0.01,
            target_support: 0.25,
            map_radius: 1.2,
            planning_margin: 0.02,
            search_pitch_deg: 20.0,
            camera_forward: 0.3,
            hover_ticks: 10,
            close_ticks: 10,
            execution: ExecutionParams::default(),
            ablation: Ablation::default(),
            seed: 0,
        }
    }
}

impl MissionConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.delta >= 0.0
            && self.delta.is_finite()
            && self.tick_hz > 0.0
            && self.tick_hz.is_finite()
            && self.max_ticks > 0
            && self.reevaluate_every > 0
            && self.scene_voxel > 0.0
            && self.target_voxel > 0.0
            && (0.0..=1.0).contains(&self.target_support)
            && self.map_radius > 0.0
            && self.planning_margin >= 0.0
            && self.search_pitch_deg.is_finite()
            && self.camera_forward.is_finite()
            && self.execution.lift_height >= 0.0
            && self.execution.refine > 0;
        if !ok {
            return Err(Error::InvalidConfig(format!("mission parameters out of range: {self:?}")));
        }
        Ok(())
    }
}

/// Everything an episode needs besides the scene.
#[derive(Clone, Debug, PartialEq)]
pub struct Pipeline {
    pub mission: MissionConfig,
    pub guidance: GuidanceParams,
    pub grasp: GraspParams,
    pub collision: CollisionParams,
    pub arm: ArmModel,
    pub placement: Placement,
    /// True robot geometry, used when replaying an execution.
    pub hulls: RobotHullModel,
    /// Grown geometry scored against the perceived cloud.
    pub planning_hulls: RobotHullModel,
}

impl Default for Pipeline {
    fn default() -> Self {
        Self::new(
            MissionConfig::default(),
            GuidanceParams::default(),
            GraspParams::default(),
            CollisionParams::default(),
            ArmModel::default(),
            Placement::default(),
        )
    }
}

impl Pipeline {
    /// Derives both hull models from `arm` and the mission's planning margin.
    pub fn new(
        mission: MissionConfig,
        guidance: GuidanceParams,
        grasp: GraspParams,
        collision: CollisionParams,
        arm: ArmModel,
        placement: Placement,
    ) -> Self {
        let hulls = RobotHullModel::for_arm(&arm);
        let planning_hulls = RobotHullModel::padded(&arm, mission.planning_margin);
        Self {
            mission,
            guidance,
            grasp,
            collision,
            arm,
            placement,
            hulls,
            planning_hulls,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mission.validate()?;
        self.guidance.validate()?;
        self.grasp.validate()?;
        self.collision.validate()?;
        self.arm.validate()?;
        self.hulls.validate()?;
        self.planning_hulls.validate()
    }

    /// Collision settings after applying the ablation flags.
    pub fn effective_collision(&self) -> CollisionParams {
        let mut c = self.collision.clone();
        if self.mission.ablation.brute_force_collision {
            c.backend = CollisionBackend::BruteForce;
        }
        if self.mission.ablation.no_obstacle_awareness {
            c.backend = CollisionBackend::Disabled;
        }
        c
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Execute(usize),
    Reposition,
}

/// Execute the highest-scoring grasp when its score exceeds `delta`; the
/// first of equal maxima wins.
pub fn decide(scored: &[ScoredGrasp], delta: f64) -> Decision {
    let mut best: Option<(usize, f64)> = None;
    for (i, g) in scored.iter().enumerate() {
        if best.is_none_or(|(_, s)| g.score > s) {
            best = Some((i, g.score));
        }
    }
    match best {
        Some((i, s)) if s > delta => Decision::Execute(i),
        _ => Decision::Reposition,
    }
}

/// Independent seed per (episode seed, tick, purpose).
pub fn mix_seed(seed: u64, tick: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(tick.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_RENDER: u64 = 1;
const STREAM_GRASP: u64 = 2;

struct Snapshot {
    obstacles: Vec<Vector3<f64>>,
    target: PointCloud,
}

fn snapshot(scene_map: &VoxelMap, target_map: &VoxelMap, radius: f64, support: f64) -> Option<Snapshot> {
    let target = PointCloud::new(target_map.supported_points(support)).ok()?;
    let c = target.centroid()?;
    let obstacles = scene_map.points_near(&c, radius);
    Some(Snapshot { obstacles, target })
}

/// Runs one episode of the closed loop on `scene` for `instruction`.
pub fn run_episode(scene: &Scene, instruction: &str, pipe: &Pipeline) -> Result<Episode> {
    pipe.validate()?;
    scene.validate()?;
    let instr = parse_instruction(instruction)?;
    let cfg = &pipe.mission;
    let collision = pipe.effective_collision();
    let cam = &scene.camera;
    let dt = 1.0 / cfg.tick_hz;
    let gt = ground_truth_grasp_center(scene, &pipe.grasp, 0.01);

    let mut pos = scene.spawn.translation;
    let mut yaw = scene.spawn.yaw();
    let q = pipe.arm.stowed();
    let mut gs = GuidanceState::new();
    let mut scene_map = VoxelMap::new(cfg.scene_voxel);
    let mut target_map = VoxelMap::new(cfg.target_voxel);
    let mut frozen: Option<(Snapshot, Vec<Vector3<f64>>, Option<Vector3<f64>>)> = None;
    let mut views = 0usize;
    let mut context_tick: Option<usize> = None;
    let mut last_eval: Option<usize> = None;
    let mut trace = Vec::new();
    let mut cycle_ms = Vec::new();
    let mut evaluations = 0;

    let result = |outcome, ticks, executed: Option<(ScoredGrasp, ExecutionReport, usize)>, cycle_ms, evaluations| {
        let (executed, execution, decision_tick) = match executed {
            Some((g, r, t)) => (Some(g), Some(r), Some(t)),
            None => (None, None, None),
        };
        EpisodeResult {
            outcome,
            p_pred: executed.as_ref().map(|g: &ScoredGrasp| g.candidate.t.into()),
            executed,
            execution,
            p_gt: gt.into(),
            decision_tick,
            ticks,
            evaluations,
            cycle_ms,
        }
    };

    for tick in 0..cfg.max_ticks {
        let started = Instant::now();
        let heading = Vector3::new(yaw.cos(), yaw.sin(), 0.0);
        let cam_pos = pos + heading * cfg.camera_forward;
        let cam_pose = match (gs.mode, gs.center) {
            (GuidanceMode::YawSearch, _) | (_, None) => camera_pose(cam_pos, yaw, cfg.search_pitch_deg.to_radians()),
            (_, Some(c)) => camera_pose_looking_at(cam_pos, c),
        };
        let out = render_depth(scene, &cam_pose, cam, mix_seed(cfg.seed, tick as u64, STREAM_RENDER));
        let cloud = &out.cloud;
        let m_ctx = segment(cloud, &instr.context, scene, cfg.min_mask_pixels);
        let m_obj = segment(cloud, &instr.object, scene, cfg.min_mask_pixels);
        let masks_found = [!m_ctx.is_empty(), !m_obj.is_empty()];
        let mut ctx_pts = mask_points(&m_ctx, cloud);
        let mut obj_pts = mask_points(&m_obj, cloud);
        let mut ctx_c = mask_centroid(&m_ctx, cloud).ok();
        let mut obj_c = mask_centroid(&m_obj, cloud).ok();

        if let Some((_, pts, c)) = &frozen {
            // Open loop: guidance keeps seeing the masks of the first evaluation.
            obj_pts = pts.clone();
            obj_c = *c;
        } else {
            if let Some(px) = &cloud.pixels {
                for (p, [u, v]) in cloud.points.iter().zip(px) {
                    if !m_obj.contains(*u, *v) {
                        scene_map.insert(p);
                    }
                }
            }
            target_map.extend(&obj_pts);
        }
        if masks_found[1] {
            views += 1;
        }
        if masks_found[0] && context_tick.is_none() {
            context_tick = Some(tick);
        }
        if !masks_found[0] && gs.mode != GuidanceMode::YawSearch {
            ctx_pts.clear();
            ctx_c = None;
        }

        let mut record = TraceRecord {
            tick,
            mode: gs.mode,
            masks_found,
            n_candidates: 0,
            s_best: None,
            decision: None,
            compute_ms: 0.0,
            position: pos.into(),
            yaw,
        };

        let due = last_eval.is_none_or(|t| tick - t >= cfg.reevaluate_every);
        if views >= cfg.min_views && due {
            let eval_start = Instant::now();
            last_eval = Some(tick);
            evaluations += 1;
            let snap = match frozen.take() {
                Some((s, _, _)) => Some(s),
                None => snapshot(&scene_map, &target_map, cfg.map_radius, cfg.target_support),
            };
            let mut decision = Decision::Reposition;
            let mut c_obj = None;
            let mut scored = Vec::new();
            if let Some(snap) = &snap {
                c_obj = snap.target.centroid();
                let seed = mix_seed(cfg.seed, tick as u64, STREAM_GRASP);
                if let Ok(set) = build_feasible_set(&snap.target, &scene.gravity, &pipe.grasp, seed) {
                    c_obj = Some(set.c_obj);
                    let index = SpatialIndex::build(&snap.obstacles);
                    let world = CollisionWorld::new(&snap.obstacles, &index);
                    let current = RobotState::hover(pos, yaw, q);
                    scored = evaluate_batch(
                        &set,
                        &current,
                        &world,
                        &collision,
                        &pipe.arm,
                        &pipe.planning_hulls,
                        &pipe.placement,
                    );
                    record.n_candidates = set.len();
                    record.s_best = scored.iter().map(|g| g.score).reduce(f64::max);
                    decision = decide(&scored, cfg.delta);
                }
            }
            cycle_ms.push(eval_start.elapsed().as_secs_f64() * 1e3);
            if cfg.ablation.open_loop {
                if let Some(s) = snap {
                    let pts = s.target.points.clone();
                    let c = s.target.centroid();
                    frozen = Some((s, pts, c));
                }
            }
            match decision {
                Decision::Execute(i) => {
                    record.decision = Some(DecisionKind::Execute);
                    record.compute_ms = started.elapsed().as_secs_f64() * 1e3;
                    trace.push(record);
                    let g = scored.swap_remove(i);
                    let report = simulate_execution(&g, scene, &pipe.arm, &pipe.hulls, &cfg.execution);
                    let exec_ticks =
                        g.trajectory.len() + cfg.hover_ticks + cfg.close_ticks + cfg.execution.lift_steps.max(1);
                    let end = tick + 1 + exec_ticks;
                    let outcome = if end > cfg.max_ticks {
                        Outcome::Timeout
                    } else {
                        match report.outcome {
                            ExecutionOutcome::Lifted => Outcome::Success,
                            ExecutionOutcome::Collided => Outcome::CollisionFailure,
                            ExecutionOutcome::Missed => Outcome::Missed,
                        }
                    };
                    let res = result(outcome, end.min(cfg.max_ticks), Some((g, report, tick)), cycle_ms, evaluations);
                    return Ok(Episode { meta: None, result: res, trace });
                }
                Decision::Reposition => {
                    record.decision = Some(DecisionKind::Reposition);
                    if let Some(c) = c_obj {
                        gs.lock_target(c);
                    }
                }
            }
        }

        let search_exhausted = gs.search_exhausted && context_tick.is_none();
        let object_lost = views == 0 && context_tick.is_some_and(|t| tick - t >= cfg.object_search_ticks);
        if search_exhausted || object_lost {
            record.compute_ms = started.elapsed().as_secs_f64() * 1e3;
            trace.push(record);
            let res = result(Outcome::SearchFailure, tick + 1, None, cycle_ms, evaluations);
            return Ok(Episode { meta: None, result: res, trace });
        }

        let input = GuidanceInput {
            context_centroid: ctx_c,
            context_points: &ctx_pts,
            object_centroid: obj_c,
            object_points: &obj_pts,
            position: pos,
            yaw,
            fov: cam.fov,
        };
        let (next, cmd) = guidance_step(&gs, &input, &pipe.guidance);
        gs = next;
        pos += cmd.linear * dt;
        yaw = cmd.yaw;
        record.compute_ms = started.elapsed().as_secs_f64() * 1e3;
        trace.push(record);
    }
    let res = result(Outcome::Timeout, cfg.max_ticks, None, cycle_ms, evaluations);
    Ok(Episode { meta: None, result: res, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::Trajectory;
    use crate::geometry::{ConvexHull, Pose};
    use crate::grasp::GraspCandidate;
    use crate::scene::{CameraModel, SceneObject};
    use nalgebra::UnitQuaternion;

    fn scored(scores: &[f64]) -> Vec<ScoredGrasp> {
        let s = RobotState::hover(Vector3::zeros(), 0.0, [0.0; 4]);
        scores
            .iter()
            .map(|&score| ScoredGrasp {
                candidate: GraspCandidate {
                    t: Vector3::zeros(),
                    rotation: UnitQuaternion::identity(),
                    width: 0.05,
                    score,
                    s_final: score,
                    pixel: [0, 0],
                },
                target: s,
                trajectory: Trajectory { waypoints: vec![s, s] },
                penalty: 0,
                v_k: score,
                score,
            })
            .collect()
    }

    #[test]
    fn decide_examples() {
        assert_eq!(decide(&[], 0.3), Decision::Reposition);
        assert_eq!(decide(&scored(&[0.1, 0.6]), 0.3), Decision::Execute(1));
        assert_eq!(decide(&scored(&[0.5, 0.5]), 0.3), Decision::Execute(0));
        assert_eq!(decide(&scored(&[0.3, 0.2]), 0.3), Decision::Reposition);
    }

    fn boxed(id: u32, label: &str, lo: [f64; 3], hi: [f64; 3], target: bool, context: bool) -> SceneObject {
        SceneObject {
            id,
            label: label.into(),
            hulls: vec![ConvexHull::from_bounds(lo.into(), hi.into()).unwrap()],
            is_target: target,
            is_context: context,
        }
    }

    pub(crate) fn easy_scene() -> Scene {
        let objects = vec![
            boxed(1, "floor", [-4.0, -4.0, -0.05], [4.0, 4.0, 0.0], false, false),
            boxed(2, "table", [-0.6, -0.4, 0.70], [0.6, 0.4, 0.75], false, true),
            boxed(3, "red box", [-0.035, -0.035, 0.75], [0.035, 0.035, 0.87], true, false),
        ];
        Scene::new(
            objects,
            PointCloud::default(),
            -Vector3::z(),
            CameraModel::default(),
            Pose::from_yaw(Vector3::new(-2.5, 0.0, 1.6), 0.0),
        )
        .unwrap()
    }

    fn pipeline(seed: u64) -> Pipeline {
        let mut p = Pipeline::default();
        p.mission.seed = seed;
        p
    }

    #[test]
    fn lone_box_succeeds() {
        let scene = easy_scene();
        let ep = run_episode(&scene, "grasp the red box from the table", &pipeline(3)).unwrap();
        let r = &ep.result;
        assert_eq!(r.outcome, Outcome::Success, "{:?}", r.execution);
        assert!(r.ticks <= 4000);
        let g = r.executed.as_ref().unwrap();
        assert!(g.score > 0.25);
        assert_eq!(r.grasp_error().unwrap() < 0.1, true);
        let last = ep.trace.last().unwrap();
        assert_eq!(last.decision, Some(DecisionKind::Execute));
    }

    #[test]
    fn unknown_label_is_search_failure() {
        let scene = easy_scene();
        let ep = run_episode(&scene, "grasp the blue mug from the table", &pipeline(1)).unwrap();
        assert_eq!(ep.result.outcome, Outcome::SearchFailure);
        let ep = run_episode(&scene, "grasp the red box from the workbench", &pipeline(1)).unwrap();
        assert_eq!(ep.result.outcome, Outcome::SearchFailure);
    }

    #[test]
    fn enclosed_target_never_executes() {
        let mut scene = easy_scene();
        let t = 0.01;
        let (lo, hi) = ([-0.15, -0.15, 0.75], [0.15, 0.15, 1.05]);
        let walls = [
            ([lo[0], lo[1], lo[2]], [hi[0], hi[1], lo[2] + t]),
            ([lo[0], lo[1], hi[2] - t], [hi[0], hi[1], hi[2]]),
            ([lo[0], lo[1], lo[2]], [lo[0] + t, hi[1], hi[2]]),
            ([hi[0] - t, lo[1], lo[2]], [hi[0], hi[1], hi[2]]),
            ([lo[0], lo[1], lo[2]], [hi[0], lo[1] + t, hi[2]]),
            ([lo[0], hi[1] - t, lo[2]], [hi[0], hi[1], hi[2]]),
        ];
        scene.objects.push(SceneObject {
            id: 9,
            label: "crate".into(),
            hulls: walls
                .iter()
                .map(|(a, b)| ConvexHull::from_bounds((*a).into(), (*b).into()).unwrap())
                .collect(),
            is_target: false,
            is_context: false,
        });
        let mut p = pipeline(2);
        p.mission.max_ticks = 600;
        let ep = run_episode(&scene, "grasp the red box from the table", &p).unwrap();
        assert!(matches!(ep.result.outcome, Outcome::Timeout | Outcome::SearchFailure));
        assert!(ep.trace.iter().all(|r| r.decision != Some(DecisionKind::Execute)));
    }

    #[test]
    fn episodes_are_deterministic() {
        let scene = easy_scene();
        let p = pipeline(11);
        let a = run_episode(&scene, "pick the red box from the table", &p).unwrap();
        let b = run_episode(&scene, "pick the red box from the table", &p).unwrap();
        let strip = |e: &Episode| {
            let mut r = e.result.clone();
            r.cycle_ms.clear();
            (r, e.trace.iter().map(|t| (t.tick, t.mode, t.position, t.s_best)).collect::<Vec<_>>())
        };
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn ablation_names_round_trip() {
        for a in [
            Ablation::default(),
            Ablation {
                no_obstacle_awareness: true,
                ..Default::default()
            },
            Ablation {
                open_loop: true,
                brute_force_collision: true,
                ..Default::default()
            },
        ] {
            assert_eq!(Ablation::from_name(&a.name()).unwrap(), a);
        }
        assert!(Ablation::from_name("wings").is_err());
    }

    #[test]
    fn trace_round_trip() {
        let scene = easy_scene();
        let mut p = pipeline(5);
        p.mission.max_ticks = 40;
        let ep = run_episode(&scene, "grasp the red box from the table", &p).unwrap();
        let mut buf = Vec::new();
        ep.write_trace(&mut buf).unwrap();
        let back = Episode::read_trace(&buf[..]).unwrap();
        assert_eq!(back.result.outcome, ep.result.outcome);
        assert_eq!(back.trace.len(), ep.trace.len());
    }
}
