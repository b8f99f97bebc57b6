//! Active-perception behaviors: stationary yaw scan, adaptive orbit radius
//! and the orbital velocity law.

use std::f64::consts::TAU;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::wrap_angle;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuidanceMode {
    YawSearch,
    OrbitContext,
    OrbitTarget,
}

impl GuidanceMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::YawSearch => "yaw_search",
            Self::OrbitContext => "orbit_context",
            Self::OrbitTarget => "orbit_target",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuidanceParams {
    /// Tangential orbit speed, m/s.
    pub v_orb: f64,
    /// Radial gain, 1/s.
    pub k_p: f64,
    /// Yaw increment per search tick, radians.
    pub yaw_step: f64,
    /// Floor on the orbit radius, meters.
    pub min_radius: f64,
    /// Orbit altitude above the active centroid, meters.
    pub altitude_offset: f64,
    /// Speed ceiling on the commanded velocity, m/s.
    pub max_speed: f64,
}

impl Default for GuidanceParams {
    fn default() -> Self {
        Self {
            v_orb: 0.3,
            k_p: 0.8,
            yaw_step: 0.1,
            min_radius: 0.5,
            altitude_offset: 0.9,
            max_speed: 1.0,
        }
    }
}

impl GuidanceParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.v_orb >= 0.0
            && self.k_p >= 0.0
            && self.yaw_step > 0.0
            && self.min_radius > 0.0
            && self.max_speed > 0.0
            && self.altitude_offset.is_finite();
        if !ok {
            return Err(Error::InvalidConfig(format!("guidance parameters out of range: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocityCommand {
    /// World-frame linear velocity, m/s.
    pub linear: Vector3<f64>,
    /// Heading setpoint, radians.
    pub yaw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuidanceState {
    pub mode: GuidanceMode,
    /// Active orbit center (context or target centroid).
    pub center: Option<Vector3<f64>>,
    /// Goal radius for the current orbit, meters.
    pub r_goal: f64,
    /// Yaw swept so far in the current scan, radians.
    pub accumulated_yaw: f64,
    /// Set once a full turn of scanning found nothing.
    pub search_exhausted: bool,
}

impl GuidanceState {
    pub fn new() -> Self {
        Self {
            mode: GuidanceMode::YawSearch,
            center: None,
            r_goal: 0.0,
            accumulated_yaw: 0.0,
            search_exhausted: false,
        }
    }

    /// Switches to orbiting the target centroid after an unsafe decision.
    pub fn lock_target(&mut self, c_obj: Vector3<f64>) {
        self.mode = GuidanceMode::OrbitTarget;
        self.center = Some(c_obj);
    }
}

impl Default for GuidanceState {
    fn default() -> Self {
        Self::new()
    }
}

/// Perception summary for one guidance tick.
#[derive(Clone, Copy, Debug)]
pub struct GuidanceInput<'a> {
    /// Context centroid, `None` while the context mask is empty.
    pub context_centroid: Option<Vector3<f64>>,
    /// Points under the context mask, for the adaptive radius.
    pub context_points: &'a [Vector3<f64>],
    /// Target centroid, `None` while the object mask is empty.
    pub object_centroid: Option<Vector3<f64>>,
    /// Points under the object mask.
    pub object_points: &'a [Vector3<f64>],
    /// Vehicle position and heading.
    pub position: Vector3<f64>,
    pub yaw: f64,
    /// Horizontal camera field of view, radians.
    pub fov: f64,
}

/// Adaptive orbit radius: `max‖p − c‖ / tan(fov/2)`.
pub fn orbit_radius(points: &[Vector3<f64>], center: &Vector3<f64>, fov: f64) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::InsufficientInput("orbit radius needs at least one point".into()));
    }
    if !(fov > 0.0 && fov < std::f64::consts::PI) {
        return Err(Error::InvalidConfig(format!("field of view {fov} outside (0, π)")));
    }
    let extent = points.iter().map(|p| (p - center).norm()).fold(0.0, f64::max);
    Ok(extent / (0.5 * fov).tan())
}

/// [`orbit_radius`] floored at `min_radius`; the flag reports that the raw
/// value was below the floor.
pub fn clamped_orbit_radius(
    points: &[Vector3<f64>],
    center: &Vector3<f64>,
    fov: f64,
    min_radius: f64,
) -> Result<(f64, bool)> {
    let r = orbit_radius(points, center, fov)?;
    Ok(if r < min_radius { (min_radius, true) } else { (r, false) })
}

/// Orbital velocity law: `v_orb·t_tan + k_p·(r_goal − ‖p_B − c‖)·n_rad`
/// with `n_rad` pointing from the center to the vehicle and
/// `t_tan = normalize(ẑ × n_rad)`. The yaw setpoint faces the center.
pub fn orbit_velocity(
    p_b: &Vector3<f64>,
    center: &Vector3<f64>,
    r_goal: f64,
    v_orb: f64,
    k_p: f64,
) -> Result<VelocityCommand> {
    let d = p_b - center;
    let dist = d.norm();
    if dist < 1e-6 {
        return Err(Error::DegenerateGeometry(format!(
            "vehicle {dist:.3e} m from orbit center, radial direction undefined"
        )));
    }
    let n_rad = d / dist;
    let t = Vector3::z().cross(&n_rad);
    // Directly above or below the center the tangent is undefined; any
    // horizontal direction is a valid choice.
    let t_tan = if t.norm() > 1e-9 { t.normalize() } else { Vector3::y() };
    let linear = t_tan * v_orb + n_rad * (k_p * (r_goal - dist));
    let yaw = if d.x.abs() + d.y.abs() > 1e-12 { (-d.y).atan2(-d.x) } else { 0.0 };
    Ok(VelocityCommand { linear, yaw })
}

fn clamp_speed(v: Vector3<f64>, max: f64) -> Vector3<f64> {
    let n = v.norm();
    if n > max {
        v * (max / n)
    } else {
        v
    }
}

/// Horizontal orbit at `center.z + altitude_offset`: the orbital law acts on
/// the horizontal projection, a proportional term holds altitude.
fn orbit_command(input: &GuidanceInput, center: &Vector3<f64>, r_goal: f64, p: &GuidanceParams) -> VelocityCommand {
    let pos = input.position;
    let flat_pos = Vector3::new(pos.x, pos.y, 0.0);
    let flat_c = Vector3::new(center.x, center.y, 0.0);
    let mut cmd = match orbit_velocity(&flat_pos, &flat_c, r_goal, p.v_orb, p.k_p) {
        Ok(c) => c,
        // Hovering over the center: back out along the current heading.
        Err(_) => VelocityCommand {
            linear: Vector3::new(-input.yaw.cos(), -input.yaw.sin(), 0.0) * p.max_speed,
            yaw: input.yaw,
        },
    };
    cmd.linear.z = p.k_p * (center.z + p.altitude_offset - pos.z);
    cmd.linear = clamp_speed(cmd.linear, p.max_speed);
    cmd
}

/// One tick of the exploration state machine.
pub fn guidance_step(
    state: &GuidanceState,
    input: &GuidanceInput,
    params: &GuidanceParams,
) -> (GuidanceState, VelocityCommand) {
    let mut next = state.clone();
    if next.mode == GuidanceMode::YawSearch && input.context_centroid.is_some() {
        next.mode = GuidanceMode::OrbitContext;
    }
    match next.mode {
        GuidanceMode::YawSearch => {
            next.accumulated_yaw += params.yaw_step;
            if next.accumulated_yaw >= TAU - 1e-9 {
                next.search_exhausted = true;
            }
            let cmd = VelocityCommand {
                linear: Vector3::zeros(),
                yaw: wrap_angle(input.yaw + params.yaw_step),
            };
            (next, cmd)
        }
        GuidanceMode::OrbitContext | GuidanceMode::OrbitTarget => {
            let (centroid, points) = if next.mode == GuidanceMode::OrbitContext {
                (input.context_centroid, input.context_points)
            } else {
                (input.object_centroid, input.object_points)
            };
            if let Some(c) = centroid {
                next.center = Some(c);
            }
            let center = next.center.expect("orbit mode has a center");
            if !points.is_empty() {
                if let Ok((r, _)) = clamped_orbit_radius(points, &center, input.fov, params.min_radius) {
                    next.r_goal = r;
                }
            }
            next.r_goal = next.r_goal.max(params.min_radius);
            let cmd = orbit_command(input, &center, next.r_goal, params);
            (next, cmd)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel_eq(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * b.abs().max(1e-300)
    }

    #[test]
    fn radius_examples() {
        let c = Vector3::new(0.3, -0.2, 0.75);
        let pts = vec![c + Vector3::new(1.0, 0.0, 0.0), c + Vector3::new(0.0, 0.5, 0.0)];
        assert!(rel_eq(orbit_radius(&pts, &c, 90f64.to_radians()).unwrap(), 1.0));
        assert!(rel_eq(orbit_radius(&pts, &c, 60f64.to_radians()).unwrap(), 1.7320508075688772));
        let (r, degenerate) = clamped_orbit_radius(&[c], &c, 1.2, 0.5).unwrap();
        assert_eq!(orbit_radius(&[c], &c, 1.2).unwrap(), 0.0);
        assert!(degenerate && r == 0.5);
        assert!(orbit_radius(&[], &c, 1.0).is_err());
    }

    #[test]
    fn velocity_examples() {
        let c = Vector3::new(1.0, 2.0, 0.0);
        let on_circle = c + Vector3::new(0.0, 2.0, 0.0);
        let cmd = orbit_velocity(&on_circle, &c, 2.0, 0.3, 0.8).unwrap();
        assert!(rel_eq(cmd.linear.norm(), 0.3));
        assert!(cmd.linear.dot(&Vector3::y()).abs() < 1e-15);
        // Counterclockwise from above: at +y the tangent is −x.
        assert!((cmd.linear - Vector3::new(-0.3, 0.0, 0.0)).norm() < 1e-15);
        assert!(rel_eq(cmd.yaw, -std::f64::consts::FRAC_PI_2));

        let far = c + Vector3::new(3.0, -1.0, 0.0);
        let cmd = orbit_velocity(&far, &c, 2.0, 0.4, 0.0).unwrap();
        assert!(cmd.linear.dot(&(far - c)).abs() < 1e-12);
        assert!(rel_eq(cmd.linear.norm(), 0.4));

        let half = c + Vector3::new(1.0, 0.0, 0.0);
        let cmd = orbit_velocity(&half, &c, 2.0, 0.5, 1.0).unwrap();
        assert!(rel_eq(cmd.linear.x, 1.0));
        assert!(rel_eq(cmd.linear.norm(), 1.25f64.sqrt()));

        assert!(matches!(
            orbit_velocity(&c, &c, 1.0, 0.3, 0.8),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn radial_convergence_without_orbit() {
        let c = Vector3::zeros();
        let k_p = 0.8;
        let dt = 1e-3;
        let r_goal = 2.0;
        for start in [0.3, 1.0, 3.5, 6.0] {
            let mut p: Vector3<f64> = Vector3::new(start * 0.6, start * 0.8, 0.0);
            let mut err = (p.norm() - r_goal).abs();
            let steps = (20.0 / k_p / dt) as usize;
            for _ in 0..steps {
                let v = orbit_velocity(&p, &c, r_goal, 0.0, k_p).unwrap();
                p += v.linear * dt;
                let e = (p.norm() - r_goal).abs();
                assert!(e <= err + 1e-15);
                err = e;
            }
            assert!(err < 1e-3, "start {start}: {err}");
        }
    }

    #[test]
    fn tangential_motion_preserves_radius() {
        let c = Vector3::zeros();
        let r = 2.0;
        let v = 0.3;
        let dt = 1e-3;
        let mut p = Vector3::new(r, 0.0, 0.0);
        let steps = (TAU * r / v / dt) as usize;
        for _ in 0..steps {
            p += orbit_velocity(&p, &c, r, v, 0.0).unwrap().linear * dt;
        }
        assert!((p.norm() - r).abs() < 0.01);
    }

    #[test]
    fn radius_cone_guarantee() {
        // Points at or beyond the plane through the center, seen from a camera
        // at distance r_goal aimed at the center, lie inside the fov/2 cone.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let c = Vector3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(0.0..1.0));
            let fov = rng.gen_range(0.3..2.8);
            let view = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).normalize();
            let pts: Vec<Vector3<f64>> = (0..50)
                .map(|_| {
                    let d = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    let d = if d.dot(&view) > 0.0 { d - view * (2.0 * d.dot(&view)) } else { d };
                    c + d * rng.gen_range(0.05..1.5)
                })
                .collect();
            let r = orbit_radius(&pts, &c, fov).unwrap();
            let cam = c + view * r;
            let axis = (c - cam).normalize();
            for p in &pts {
                let ang = (p - cam).normalize().dot(&axis).clamp(-1.0, 1.0).acos();
                assert!(ang <= 0.5 * fov + 1e-9);
            }
        }
    }

    fn input(pos: Vector3<f64>, ctx: Option<Vector3<f64>>, pts: &[Vector3<f64>]) -> GuidanceInput<'_> {
        GuidanceInput {
            context_centroid: ctx,
            context_points: pts,
            object_centroid: None,
            object_points: &[],
            position: pos,
            yaw: 0.4,
            fov: std::f64::consts::FRAC_PI_2,
        }
    }

    #[test]
    fn yaw_search_advances_and_exhausts() {
        let params = GuidanceParams::default();
        let mut s = GuidanceState::new();
        let mut yaw = 0.0;
        let needed = (TAU / params.yaw_step).ceil() as usize;
        for i in 0..needed {
            let mut inp = input(Vector3::zeros(), None, &[]);
            inp.yaw = yaw;
            let (n, cmd) = guidance_step(&s, &inp, &params);
            assert_eq!(n.mode, GuidanceMode::YawSearch);
            assert_eq!(cmd.linear, Vector3::zeros());
            assert!((wrap_angle(cmd.yaw - yaw) - params.yaw_step).abs() < 1e-12);
            assert_eq!(n.search_exhausted, i + 1 == needed);
            yaw = cmd.yaw;
            s = n;
        }
        assert_eq!(needed, 63);
    }

    #[test]
    fn context_detection_starts_orbit() {
        let params = GuidanceParams::default();
        let c = Vector3::new(2.0, 0.0, 0.75);
        let pts = vec![c + Vector3::new(0.6, 0.0, 0.0), c - Vector3::new(0.6, 0.0, 0.0)];
        let pos = Vector3::new(0.0, 0.0, c.z + params.altitude_offset);
        let (n, cmd) = guidance_step(&GuidanceState::new(), &input(pos, Some(c), &pts), &params);
        assert_eq!(n.mode, GuidanceMode::OrbitContext);
        assert_eq!(n.center, Some(c));
        assert!((n.r_goal - 0.6).abs() < 1e-12);
        let flat = orbit_velocity(&Vector3::new(0.0, 0.0, 0.0), &Vector3::new(2.0, 0.0, 0.0), 0.6, params.v_orb, params.k_p)
            .unwrap();
        let expect = clamp_speed(Vector3::new(flat.linear.x, flat.linear.y, 0.0), params.max_speed);
        assert!((cmd.linear - expect).norm() < 1e-12);
        assert!(cmd.yaw.abs() < 1e-12);
        // Deterministic.
        let again = guidance_step(&GuidanceState::new(), &input(pos, Some(c), &pts), &params);
        assert_eq!(again, (n, cmd));
    }

    #[test]
    fn target_lock_orbits_object() {
        let params = GuidanceParams::default();
        let mut s = GuidanceState::new();
        s.mode = GuidanceMode::OrbitContext;
        s.center = Some(Vector3::zeros());
        let c_obj = Vector3::new(1.0, 1.0, 0.8);
        s.lock_target(c_obj);
        let pos = Vector3::new(0.0, 1.0, 0.8 + params.altitude_offset);
        let (n, cmd) = guidance_step(&s, &input(pos, Some(Vector3::zeros()), &[]), &params);
        assert_eq!(n.mode, GuidanceMode::OrbitTarget);
        assert_eq!(n.center, Some(c_obj));
        assert!(n.r_goal >= params.min_radius);
        assert!(cmd.yaw.abs() < 1e-12);
        assert!(cmd.linear.norm() <= params.max_speed + 1e-12);
    }
}
