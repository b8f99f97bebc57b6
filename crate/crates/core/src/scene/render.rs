use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{CameraModel, Scene};
use crate::geometry::{ConvexHull, PointCloud, Pose, CLUTTER_LABEL};

/// Row-major depth image in meters; `0.0` marks a missing return.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f64>,
}

impl DepthImage {
    pub fn get(&self, u: u32, v: u32) -> f64 {
        self.data[(v * self.width + u) as usize]
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|d| **d > 0.0).count()
    }
}

#[derive(Clone, Debug)]
pub struct RenderOutput {
    pub depth: DepthImage,
    /// World-frame back-projection of every valid pixel, row-major, with
    /// object-id labels and pixel coordinates.
    pub cloud: PointCloud,
}

/// Camera-frame ray through the center of pixel `(u, v)`, scaled so its
/// z component is 1 (the ray parameter equals depth).
pub fn pixel_ray(cam: &CameraModel, u: u32, v: u32) -> Vector3<f64> {
    let f = cam.focal();
    Vector3::new(
        (u as f64 + 0.5 - 0.5 * cam.width as f64) / f,
        (v as f64 + 0.5 - 0.5 * cam.height as f64) / f,
        1.0,
    )
}

/// Camera pose at `position` with heading `yaw` and downward tilt `pitch`.
pub fn camera_pose(position: Vector3<f64>, yaw: f64, pitch: f64) -> Pose {
    let forward = Vector3::new(yaw.cos() * pitch.cos(), yaw.sin() * pitch.cos(), -pitch.sin());
    let right = Vector3::new(yaw.sin(), -yaw.cos(), 0.0);
    Pose::from_axes(position, right, forward.cross(&right), forward)
}

/// Camera pose at `position` with the optical axis through `target`.
pub fn camera_pose_looking_at(position: Vector3<f64>, target: Vector3<f64>) -> Pose {
    let d = target - position;
    let horiz = (d.x * d.x + d.y * d.y).sqrt();
    let yaw = if horiz > 1e-12 { d.y.atan2(d.x) } else { 0.0 };
    let pitch = (-d.z).atan2(horiz);
    camera_pose(position, yaw, pitch)
}

/// Pixel bounds `[lo, hi]` along one image axis covering a sphere at
/// camera-frame lateral offset `x`, depth `z`, radius `r`.
fn sphere_span(x: f64, z: f64, r: f64, f: f64, size: u32) -> Option<(u32, u32)> {
    if z - r <= 1e-6 {
        return Some((0, size - 1));
    }
    let hi = if x + r >= 0.0 { (x + r) / (z - r) } else { (x + r) / (z + r) };
    let lo = if x - r <= 0.0 { (x - r) / (z - r) } else { (x - r) / (z + r) };
    let c = 0.5 * size as f64 - 0.5;
    let a = (f * lo + c).floor();
    let b = (f * hi + c).ceil();
    if b < 0.0 || a > size as f64 - 1.0 {
        return None;
    }
    Some((a.max(0.0) as u32, b.min(size as f64 - 1.0) as u32))
}

/// Ray-casts the scene from `pose` and applies the sensor model: additive
/// Gaussian depth noise with standard deviation `cam.sigma` and independent
/// per-pixel dropout. Bit-deterministic for a fixed `seed`.
pub fn render_depth(scene: &Scene, pose: &Pose, cam: &CameraModel, seed: u64) -> RenderOutput {
    let (w, h) = (cam.width, cam.height);
    let n = cam.pixel_count();
    let f = cam.focal();
    let origin = pose.translation;
    let mut zbuf = vec![f64::INFINITY; n];
    let mut label = vec![CLUTTER_LABEL; n];

    let inv = pose.inverse();
    let dirs: Vec<Vector3<f64>> = (0..h)
        .flat_map(|v| (0..w).map(move |u| (u, v)))
        .map(|(u, v)| pose.transform_vector(&pixel_ray(cam, u, v)))
        .collect();
    let hulls: Vec<(u32, &ConvexHull)> = scene.hulls().collect();
    for (id, hull) in hulls {
        let c = inv.transform_point(&hull.centroid());
        let r = hull.circumradius();
        if c.z + r <= 0.0 {
            continue;
        }
        let Some((u0, u1)) = sphere_span(c.x, c.z, r, f, w) else { continue };
        let Some((v0, v1)) = sphere_span(c.y, c.z, r, f, h) else { continue };
        for v in v0..=v1 {
            for u in u0..=u1 {
                let k = (v * w + u) as usize;
                let Some((t_in, t_out)) = hull.clip_line(&origin, &dirs[k]) else { continue };
                // Hulls enclosing the camera are not visible from inside.
                if t_in <= 0.0 || t_out < t_in {
                    continue;
                }
                if t_in < zbuf[k] {
                    zbuf[k] = t_in;
                    label[k] = id;
                }
            }
        }
    }
    let half_w = 0.5 * w as f64;
    let half_h = 0.5 * h as f64;
    for p in &scene.clutter.points {
        let q = inv.transform_point(p);
        if q.z <= 0.0 {
            continue;
        }
        let u = (f * q.x / q.z + half_w).floor();
        let v = (f * q.y / q.z + half_h).floor();
        if u < 0.0 || v < 0.0 || u >= w as f64 || v >= h as f64 {
            continue;
        }
        let k = v as usize * w as usize + u as usize;
        if q.z < zbuf[k] {
            zbuf[k] = q.z;
            label[k] = CLUTTER_LABEL;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = vec![0.0; n];
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut pixels = Vec::new();
    for v in 0..h {
        for u in 0..w {
            let k = (v * w + u) as usize;
            // Both draws happen for every pixel so the stream layout does
            // not depend on scene content.
            let drop: f64 = rng.gen();
            let noise: f64 = rng.sample(StandardNormal);
            if !zbuf[k].is_finite() || drop < cam.dropout {
                continue;
            }
            let depth = zbuf[k] + cam.sigma * noise;
            if depth <= 0.0 || depth > cam.max_range {
                continue;
            }
            data[k] = depth;
            points.push(origin + dirs[k] * depth);
            labels.push(label[k]);
            pixels.push([u, v]);
        }
    }
    RenderOutput {
        depth: DepthImage {
            width: w,
            height: h,
            data,
        },
        cloud: PointCloud {
            points,
            labels: Some(labels),
            pixels: Some(pixels),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::SceneObject;

    fn wall_scene(cam: CameraModel) -> Scene {
        let wall = ConvexHull::from_bounds(Vector3::new(2.0, -5.0, -5.0), Vector3::new(2.5, 5.0, 5.0)).unwrap();
        let objects = vec![SceneObject {
            id: 7,
            label: "wall".into(),
            hulls: vec![wall],
            is_target: true,
            is_context: false,
        }];
        Scene::new(objects, PointCloud::default(), -Vector3::z(), cam, Pose::identity()).unwrap()
    }

    fn noiseless(width: u32, height: u32) -> CameraModel {
        CameraModel {
            width,
            height,
            sigma: 0.0,
            dropout: 0.0,
            ..CameraModel::default()
        }
    }

    #[test]
    fn camera_pose_axes() {
        let p = camera_pose(Vector3::zeros(), 0.0, 0.0);
        assert!((p.transform_vector(&Vector3::z()) - Vector3::x()).norm() < 1e-12);
        assert!((p.transform_vector(&Vector3::x()) + Vector3::y()).norm() < 1e-12);
        assert!((p.transform_vector(&Vector3::y()) + Vector3::z()).norm() < 1e-12);
        let look = camera_pose_looking_at(Vector3::new(1.0, 1.0, 2.0), Vector3::new(1.0, 3.0, 0.0));
        let fwd = look.transform_vector(&Vector3::z());
        assert!((fwd - Vector3::new(0.0, 1.0, -1.0).normalize()).norm() < 1e-12);
    }

    #[test]
    fn noiseless_plane_depth() {
        let cam = noiseless(161, 121);
        let scene = wall_scene(cam);
        let out = render_depth(&scene, &camera_pose(Vector3::zeros(), 0.0, 0.0), &cam, 1);
        assert!((out.depth.get(80, 60) - 2.0).abs() < 1e-12);
        assert_eq!(out.depth.valid_count(), cam.pixel_count());
        // Every back-projected point lies on the front face.
        for p in &out.cloud.points {
            assert!((p.x - 2.0).abs() < 1e-9);
        }
        assert!(out.cloud.labels.as_ref().unwrap().iter().all(|l| *l == 7));
    }

    #[test]
    fn full_dropout_is_empty() {
        let cam = CameraModel {
            dropout: 1.0,
            ..CameraModel::default()
        };
        let scene = wall_scene(cam);
        let out = render_depth(&scene, &camera_pose(Vector3::zeros(), 0.0, 0.0), &cam, 3);
        assert!(out.cloud.is_empty());
        assert_eq!(out.depth.valid_count(), 0);
    }

    #[test]
    fn noise_std_matches_sigma() {
        let cam = CameraModel {
            width: 1,
            height: 1,
            sigma: 0.02,
            dropout: 0.0,
            ..CameraModel::default()
        };
        let scene = wall_scene(cam);
        let pose = camera_pose(Vector3::zeros(), 0.0, 0.0);
        let samples: Vec<f64> = (0..10_000)
            .map(|s| render_depth(&scene, &pose, &cam, s).depth.data[0])
            .collect();
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let var = samples.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / samples.len() as f64;
        let std = var.sqrt();
        assert!((0.018..=0.022).contains(&std), "std {std}");
        assert!((mean - 2.0).abs() < 0.002);
    }

    #[test]
    fn deterministic_per_seed() {
        let cam = CameraModel::default();
        let scene = wall_scene(cam);
        let pose = camera_pose(Vector3::new(0.0, 0.3, 0.1), 0.2, 0.1);
        let a = render_depth(&scene, &pose, &cam, 42);
        let b = render_depth(&scene, &pose, &cam, 42);
        let c = render_depth(&scene, &pose, &cam, 43);
        assert_eq!(a.depth, b.depth);
        assert_eq!(a.cloud, b.cloud);
        assert_ne!(a.depth, c.depth);
    }

    #[test]
    fn culling_matches_unculled_raycast() {
        // Small boxes scattered around the camera, checked against a
        // per-pixel scan over every hull.
        let cam = noiseless(64, 48);
        let mut objects = Vec::new();
        for i in 0..12u32 {
            let a = i as f64 * 0.7;
            let c = Vector3::new(2.0 * a.cos() + 0.5, 2.0 * a.sin(), 0.3 * (i as f64 - 6.0) / 6.0);
            let h = ConvexHull::from_bounds(c - Vector3::repeat(0.15), c + Vector3::repeat(0.15)).unwrap();
            objects.push(SceneObject {
                id: i,
                label: format!("box {i}"),
                hulls: vec![h],
                is_target: i == 0,
                is_context: false,
            });
        }
        let scene = Scene::new(objects, PointCloud::default(), -Vector3::z(), cam, Pose::identity()).unwrap();
        let pose = camera_pose(Vector3::new(-0.5, 0.0, 0.0), 0.3, 0.05);
        let out = render_depth(&scene, &pose, &cam, 0);
        for v in 0..cam.height {
            for u in 0..cam.width {
                let dir = pose.transform_vector(&pixel_ray(&cam, u, v));
                let best = scene
                    .hulls()
                    .filter_map(|(_, h)| h.clip_line(&pose.translation, &dir))
                    .filter(|(a, b)| *a > 0.0 && b >= a)
                    .map(|(a, _)| a)
                    .fold(f64::INFINITY, f64::min);
                let got = out.depth.get(u, v);
                if best.is_finite() {
                    assert!((got - best).abs() < 1e-12);
                } else {
                    assert_eq!(got, 0.0);
                }
            }
        }
    }
}
