//! Synthetic scenes, the depth-camera model, oracle segmentation and the
//! instruction parser.

mod file;
mod instruction;
mod render;
mod segment;

pub use file::{CameraFile, ObjectFile, PartFile, PoseFile, SceneFile, ShapeFile, SpawnFile, SCENE_SCHEMA};
pub use instruction::{parse_instruction, Instruction};
pub use render::{camera_pose, camera_pose_looking_at, pixel_ray, render_depth, DepthImage, RenderOutput};
pub use segment::{mask_centroid, mask_points, segment, SegmentationMask, DEFAULT_MIN_MASK_PIXELS};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ConvexHull, PointCloud, Pose, CLUTTER_LABEL};

/// A labeled scene object: a union of convex hulls in the world frame.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: u32,
    pub label: String,
    pub hulls: Vec<ConvexHull>,
    pub is_target: bool,
    pub is_context: bool,
}

impl SceneObject {
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        self.hulls.iter().any(|h| h.contains(p))
    }

    /// Ground-truth surface samples at the given grid spacing. Samples
    /// buried inside another part of the same object are dropped.
    pub fn surface_points(&self, spacing: f64) -> Vec<Vector3<f64>> {
        let mut out = Vec::new();
        for (i, h) in self.hulls.iter().enumerate() {
            for p in h.sample_surface(spacing) {
                let buried = self
                    .hulls
                    .iter()
                    .enumerate()
                    .any(|(j, g)| j != i && g.contains(&p));
                if !buried {
                    out.push(p);
                }
            }
        }
        out
    }

    pub fn centroid(&self) -> Vector3<f64> {
        self.hulls.iter().map(|h| h.centroid()).sum::<Vector3<f64>>() / self.hulls.len() as f64
    }
}

/// Pinhole depth camera: optical axis +z, image x right, image y down.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    /// Horizontal field of view, radians.
    pub fov: f64,
    pub width: u32,
    pub height: u32,
    pub max_range: f64,
    /// Standard deviation of additive depth noise, meters.
    pub sigma: f64,
    /// Per-pixel probability of a missing return.
    pub dropout: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            fov: 90f64.to_radians(),
            width: 160,
            height: 120,
            max_range: 6.0,
            sigma: 0.02,
            dropout: 0.05,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.fov > 0.0 && self.fov < std::f64::consts::PI) {
            return Err(Error::InvalidScene(format!("camera fov {} outside (0, π)", self.fov)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidScene("camera image size must be positive".into()));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::InvalidScene("camera sigma must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.dropout) {
            return Err(Error::InvalidScene("camera dropout must lie in [0, 1]".into()));
        }
        if !(self.max_range > 0.0) {
            return Err(Error::InvalidScene("camera max range must be positive".into()));
        }
        Ok(())
    }

    /// Focal length in pixels.
    pub fn focal(&self) -> f64 {
        0.5 * self.width as f64 / (0.5 * self.fov).tan()
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
    /// Free obstacle points that belong to no modeled object.
    pub clutter: PointCloud,
    /// Unit gravity direction in the world frame.
    pub gravity: Vector3<f64>,
    pub camera: CameraModel,
    /// Vehicle base pose at episode start.
    pub spawn: Pose,
}

impl Scene {
    pub fn new(
        objects: Vec<SceneObject>,
        clutter: PointCloud,
        gravity: Vector3<f64>,
        camera: CameraModel,
        spawn: Pose,
    ) -> Result<Self> {
        let scene = Self {
            objects,
            clutter,
            gravity,
            camera,
            spawn,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        if (self.gravity.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidScene("gravity must be a unit vector".into()));
        }
        self.camera.validate()?;
        let targets = self.objects.iter().filter(|o| o.is_target).count();
        if targets != 1 {
            return Err(Error::InvalidScene(format!("expected exactly one target, found {targets}")));
        }
        for (i, o) in self.objects.iter().enumerate() {
            if o.id == CLUTTER_LABEL {
                return Err(Error::InvalidScene(format!("object id {} is reserved", o.id)));
            }
            if o.hulls.is_empty() {
                return Err(Error::InvalidScene(format!("object {:?} has no geometry", o.label)));
            }
            for other in &self.objects[..i] {
                if other.id == o.id {
                    return Err(Error::InvalidScene(format!("duplicate object id {}", o.id)));
                }
                if other.label.eq_ignore_ascii_case(&o.label) {
                    return Err(Error::InvalidScene(format!("duplicate label {:?}", o.label)));
                }
            }
        }
        Ok(())
    }

    pub fn target(&self) -> &SceneObject {
        self.objects
            .iter()
            .find(|o| o.is_target)
            .expect("validated scene has a target")
    }

    pub fn object(&self, id: u32) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// Case-insensitive label lookup.
    pub fn object_by_label(&self, label: &str) -> Option<&SceneObject> {
        let label = label.trim();
        self.objects.iter().find(|o| o.label.eq_ignore_ascii_case(label))
    }

    /// Every world-frame hull paired with its object id.
    pub fn hulls(&self) -> impl Iterator<Item = (u32, &ConvexHull)> {
        self.objects
            .iter()
            .flat_map(|o| o.hulls.iter().map(move |h| (o.id, h)))
    }
}
