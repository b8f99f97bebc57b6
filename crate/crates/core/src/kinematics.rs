//! Forward and closed-form inverse kinematics of the yaw + planar-3R arm,
//! and base placement for a grasp.
//!
//! Chain (vehicle base frame, z up): mount `mount_offset` below the base
//! center; joint 1 yaws about −z; joints 2–4 pitch about the arm's lateral
//! axis. Links hang along −z at zero configuration, so the end effector sits
//! `mount + ΣL` below the base with its approach axis (+x) pointing down.
//! A link at cumulative pitch φ points along `(sin φ, 0, −cos φ)` in the
//! arm's sagittal frame; positive pitch swings it forward.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Pose};
use crate::grasp::GraspCandidate;

pub type JointVector = [f64; 4];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmModel {
    /// Link lengths, meters.
    pub link_lengths: [f64; 4],
    /// Joint limits `[min, max]`, radians.
    pub limits: [[f64; 2]; 4],
    /// Distance of the arm mount below the base center, meters.
    pub mount_offset: f64,
}

impl Default for ArmModel {
    fn default() -> Self {
        let deg = |a: f64, b: f64| [a.to_radians(), b.to_radians()];
        Self {
            link_lengths: [0.10, 0.15, 0.15, 0.08],
            limits: [deg(-170.0, 170.0), deg(-100.0, 100.0), deg(-140.0, 140.0), deg(-135.0, 135.0)],
            mount_offset: 0.12,
        }
    }
}

impl ArmModel {
    pub fn validate(&self) -> Result<()> {
        if self.link_lengths.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::InvalidConfig("link lengths must be positive".into()));
        }
        for (i, [lo, hi]) in self.limits.iter().enumerate() {
            if !(lo < hi) || *lo < -PI - 1e-12 || *hi > PI + 1e-12 {
                return Err(Error::InvalidConfig(format!("joint {} limits must satisfy -π ≤ min < max ≤ π", i + 1)));
            }
        }
        if !self.mount_offset.is_finite() {
            return Err(Error::InvalidConfig("mount offset must be finite".into()));
        }
        Ok(())
    }

    pub fn reach(&self) -> f64 {
        self.link_lengths[1] + self.link_lengths[2] + self.link_lengths[3]
    }

    pub fn within_limits(&self, q: &JointVector) -> bool {
        q.iter().zip(&self.limits).all(|(v, [lo, hi])| *v >= *lo && *v <= *hi)
    }

    pub fn check_limits(&self, q: &JointVector) -> Result<()> {
        for (i, (v, [lo, hi])) in q.iter().zip(&self.limits).enumerate() {
            if !(*v >= *lo && *v <= *hi) {
                return Err(Error::JointLimit {
                    joint: i + 1,
                    value: *v,
                    min: *lo,
                    max: *hi,
                });
            }
        }
        Ok(())
    }

    /// Compact configuration used while flying.
    pub fn stowed(&self) -> JointVector {
        [0.0, 60f64.to_radians(), -120f64.to_radians(), 60f64.to_radians()]
    }
}

/// Vehicle base pose plus arm joints.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub base: Pose,
    pub q: JointVector,
}

impl RobotState {
    /// Hover-constrained state: zero roll and pitch by construction.
    pub fn hover(position: Vector3<f64>, yaw: f64, q: JointVector) -> Self {
        Self {
            base: Pose::from_yaw(position, yaw),
            q,
        }
    }

    pub fn interpolate(&self, other: &RobotState, s: f64) -> RobotState {
        if s <= 0.0 {
            return *self;
        }
        if s >= 1.0 {
            return *other;
        }
        let mut q = [0.0; 4];
        for (i, v) in q.iter_mut().enumerate() {
            *v = self.q[i] + (other.q[i] - self.q[i]) * s;
        }
        RobotState {
            base: self.base.interpolate(&other.base, s),
            q,
        }
    }
}

fn rot_z(a: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), a)
}

fn rot_y(a: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::y_axis(), a)
}

fn down(l: f64) -> Pose {
    Pose::from_translation(Vector3::new(0.0, 0.0, -l))
}

/// Frames along the chain without limit checks: joint frames 1–4 (each at
/// its joint, link hanging along local −z) and the end effector.
pub fn link_frames(q: &JointVector, base: &Pose, arm: &ArmModel) -> [Pose; 5] {
    let l = arm.link_lengths;
    let f1 = base * &(down(arm.mount_offset) * Pose::from_rotation(rot_z(-q[0])));
    let f2 = &f1 * &(down(l[0]) * Pose::from_rotation(rot_y(-q[1])));
    let f3 = &f2 * &(down(l[1]) * Pose::from_rotation(rot_y(-q[2])));
    let f4 = &f3 * &(down(l[2]) * Pose::from_rotation(rot_y(-q[3])));
    let ee = &f4 * &(down(l[3]) * Pose::from_rotation(rot_y(FRAC_PI_2)));
    [f1, f2, f3, f4, ee]
}

/// End-effector pose in the world without limit checks.
pub fn forward_kinematics_unchecked(q: &JointVector, base: &Pose, arm: &ArmModel) -> Pose {
    link_frames(q, base, arm)[4]
}

/// End-effector pose in the world.
pub fn forward_kinematics(q: &JointVector, base: &Pose, arm: &ArmModel) -> Result<Pose> {
    arm.check_limits(q)?;
    Ok(forward_kinematics_unchecked(q, base, arm))
}

/// Planar 2R solutions for links `l2`, `l3` reaching `(r, z)` relative to
/// joint 2, as `(φ2, q3)` ordered higher elbow first (ties: q3 < 0 first).
fn planar_2r(r: f64, z: f64, l2: f64, l3: f64) -> Vec<(f64, f64)> {
    // Angles measured from straight down toward +r.
    let (x, y) = (-z, r);
    let d = (x * x + y * y - l2 * l2 - l3 * l3) / (2.0 * l2 * l3);
    if !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&d) {
        return Vec::new();
    }
    let d = d.clamp(-1.0, 1.0);
    let q3a = d.acos();
    let mut sols: Vec<(f64, f64)> = [-q3a, q3a]
        .iter()
        .map(|&q3| {
            let phi2 = y.atan2(x) - (l3 * q3.sin()).atan2(l2 + l3 * q3.cos());
            (phi2, q3)
        })
        .collect();
    if q3a == 0.0 {
        sols.truncate(1);
    }
    // Elbow height: z of joint 3 = −l2·cos φ2.
    sols.sort_by(|a, b| (-a.0.cos()).total_cmp(&(-b.0.cos())).reverse().then(a.1.total_cmp(&b.1)));
    sols
}

/// Closed-form IK for an end-effector target expressed in the vehicle base
/// frame. Matches position and the approach axis projected into the arm's
/// sagittal plane; roll about the approach axis is free. Returns the first
/// in-limit solution in the order: facing branch (elbow up, down), then the
/// reversed branch.
pub fn inverse_kinematics(target_in_base: &Pose, arm: &ArmModel) -> Option<JointVector> {
    let [l1, l2, l3, l4] = arm.link_lengths;
    let p = target_in_base.translation + Vector3::new(0.0, 0.0, arm.mount_offset);
    let a = target_in_base.transform_vector(&Vector3::x());
    let horiz = (p.x * p.x + p.y * p.y).sqrt();
    let theta = if horiz > 1e-9 {
        p.y.atan2(p.x)
    } else if a.x.hypot(a.y) > 1e-9 {
        a.y.atan2(a.x)
    } else {
        0.0
    };
    for heading in [theta, theta + PI] {
        let fwd = Vector3::new(heading.cos(), heading.sin(), 0.0);
        let r = p.dot(&fwd);
        let phi4 = a.dot(&fwd).atan2(-a.z);
        let wr = r - l4 * phi4.sin();
        let wz = p.z + l4 * phi4.cos() + l1;
        for (phi2, q3) in planar_2r(wr, wz, l2, l3) {
            let q = [
                wrap_angle(-heading),
                wrap_angle(phi2),
                wrap_angle(q3),
                wrap_angle(phi4 - phi2 - q3),
            ];
            if arm.within_limits(&q) {
                return Some(q);
            }
        }
    }
    None
}

/// Base placement parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Placement {
    /// Extra retreat of the base along the approach axis, meters.
    pub standoff: f64,
    /// Lowest permitted base altitude, meters.
    pub min_base_z: f64,
}

impl Default for Placement {
    fn default() -> Self {
        Self {
            standoff: 0.0,
            min_base_z: 0.3,
        }
    }
}

/// Yaw of the base for a grasp: facing the horizontal approach, or for a
/// vertical approach, lining the arm's lateral axis up with the jaws.
pub fn grasp_yaw(g: &GraspCandidate) -> f64 {
    let a = g.approach();
    if a.x.hypot(a.y) > 1e-6 {
        return a.y.atan2(a.x);
    }
    let c = g.closing();
    let mut yaw = wrap_angle(c.y.atan2(c.x) - FRAC_PI_2);
    if yaw <= -FRAC_PI_2 {
        yaw += PI;
    } else if yaw > FRAC_PI_2 {
        yaw -= PI;
    }
    yaw
}

/// Hover base pose and joints reaching grasp `g`, or `None` if unreachable.
pub fn base_pose_for_grasp(g: &GraspCandidate, arm: &ArmModel, placement: &Placement) -> Option<RobotState> {
    let yaw = grasp_yaw(g);
    let a = g.approach();
    let fwd = Vector3::new(yaw.cos(), yaw.sin(), 0.0);
    let phi4 = a.dot(&fwd).atan2(-a.z);
    let nominal = [0.0, 30f64.to_radians(), -60f64.to_radians(), phi4 + 30f64.to_radians()];
    let ee_offset = forward_kinematics_unchecked(&nominal, &Pose::from_yaw(Vector3::zeros(), yaw), arm).translation;
    let mut pos = g.t - ee_offset - a * placement.standoff;
    pos.z = pos.z.max(placement.min_base_z);
    let base = Pose::from_yaw(pos, yaw);
    let q = inverse_kinematics(&base.inverse().compose(&g.pose()), arm)?;
    Some(RobotState { base, q })
}
