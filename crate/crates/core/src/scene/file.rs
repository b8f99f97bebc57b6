use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{CameraModel, Scene, SceneObject};
use crate::error::{Error, Result};
use crate::geometry::{ConvexHull, PointCloud, Pose};

pub const SCENE_SCHEMA: u32 = 1;

/// On-disk scene document (JSON).
///
/// ```json
/// {"schema": 1, "gravity": [0, 0, -1],
///  "camera": {"fov_deg": 90, "width": 160, "height": 120, "sigma_m": 0.02, "dropout": 0.05},
///  "objects": [{"id": 1, "label": "steel table", "context": true,
///               "shape": "box", "dims": [1.2, 0.8, 0.04],
///               "pose": {"xyz": [0, 0, 0.73]}}]}
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub schema: u32,
    pub gravity: [f64; 3],
    pub camera: CameraFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spawn: Option<SpawnFile>,
    pub objects: Vec<ObjectFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub clutter: Vec<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraFile {
    pub fov_deg: f64,
    pub width: u32,
    pub height: u32,
    pub sigma_m: f64,
    pub dropout: f64,
    #[serde(default = "default_max_range")]
    pub max_range_m: f64,
}

fn default_max_range() -> f64 {
    6.0
}

impl From<&CameraModel> for CameraFile {
    fn from(c: &CameraModel) -> Self {
        Self {
            fov_deg: c.fov.to_degrees(),
            width: c.width,
            height: c.height,
            sigma_m: c.sigma,
            dropout: c.dropout,
            max_range_m: c.max_range,
        }
    }
}

impl From<&CameraFile> for CameraModel {
    fn from(c: &CameraFile) -> Self {
        Self {
            fov: c.fov_deg.to_radians(),
            width: c.width,
            height: c.height,
            max_range: c.max_range_m,
            sigma: c.sigma_m,
            dropout: c.dropout,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpawnFile {
    pub xyz: [f64; 3],
    #[serde(default)]
    pub yaw_deg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseFile {
    pub xyz: [f64; 3],
    #[serde(default)]
    pub rpy_deg: [f64; 3],
}

impl PoseFile {
    pub fn at(xyz: [f64; 3]) -> Self {
        Self {
            xyz,
            rpy_deg: [0.0; 3],
        }
    }

    pub fn with_yaw(xyz: [f64; 3], yaw_deg: f64) -> Self {
        Self {
            xyz,
            rpy_deg: [0.0, 0.0, yaw_deg],
        }
    }

    pub fn to_pose(&self) -> Pose {
        let [r, p, y] = self.rpy_deg.map(f64::to_radians);
        Pose::from_rpy(Vector3::from(self.xyz), r, p, y)
    }
}

/// Primitive shape. `box` and `prism` take their size from `dims`
/// (prism: `dims[0]` is the inscribed diameter, `dims[2]` the height).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeFile {
    Box,
    Prism { sides: usize },
    Hull { vertices: Vec<[f64; 3]> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartFile {
    pub shape: ShapeFile,
    pub pose: PoseFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectFile {
    pub id: u32,
    pub label: String,
    #[serde(default)]
    pub target: bool,
    #[serde(default)]
    pub context: bool,
    pub shape: ShapeFile,
    pub pose: PoseFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<[f64; 3]>,
    /// Extra parts for objects modeled as a union of hulls.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<PartFile>,
}

fn build_part(shape: &ShapeFile, dims: Option<[f64; 3]>, pose: &PoseFile, label: &str) -> Result<ConvexHull> {
    let need_dims = || {
        dims.map(Vector3::from).ok_or_else(|| {
            Error::InvalidScene(format!("object {label:?}: shape requires dims"))
        })
    };
    let local = match shape {
        ShapeFile::Box => {
            let d = need_dims()?;
            if d.iter().any(|c| !(*c > 0.0)) {
                return Err(Error::InvalidScene(format!("object {label:?}: dims must be positive")));
            }
            ConvexHull::cuboid(d)?
        }
        ShapeFile::Prism { sides } => {
            let d = need_dims()?;
            ConvexHull::prism(*sides, 0.5 * d.x, d.z)?
        }
        ShapeFile::Hull { vertices } => {
            let v: Vec<_> = vertices.iter().map(|p| Vector3::from(*p)).collect();
            ConvexHull::from_vertices(&v)?
        }
    };
    Ok(local.transformed(&pose.to_pose()))
}

impl SceneFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Validates the document and builds the world-frame scene.
    pub fn to_scene(&self) -> Result<Scene> {
        if self.schema != SCENE_SCHEMA {
            return Err(Error::InvalidScene(format!(
                "unsupported schema {} (expected {SCENE_SCHEMA})",
                self.schema
            )));
        }
        let mut objects = Vec::with_capacity(self.objects.len());
        for o in &self.objects {
            let mut hulls = vec![build_part(&o.shape, o.dims, &o.pose, &o.label)?];
            for part in &o.parts {
                hulls.push(build_part(&part.shape, part.dims, &part.pose, &o.label)?);
            }
            objects.push(SceneObject {
                id: o.id,
                label: o.label.clone(),
                hulls,
                is_target: o.target,
                is_context: o.context,
            });
        }
        let g = Vector3::from(self.gravity);
        if !(g.norm() > 0.0) {
            return Err(Error::InvalidScene("gravity must be non-zero".into()));
        }
        let clutter = PointCloud::new(self.clutter.iter().map(|p| Vector3::from(*p)).collect())?;
        let spawn = self
            .spawn
            .as_ref()
            .map(|s| Pose::from_yaw(Vector3::from(s.xyz), s.yaw_deg.to_radians()))
            .unwrap_or_else(|| Pose::from_yaw(Vector3::new(-2.5, 0.0, 1.6), 0.0));
        Scene::new(
            objects,
            clutter,
            g.normalize(),
            CameraModel::from(&self.camera),
            spawn,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"{
        "schema": 1,
        "gravity": [0, 0, -1],
        "camera": {"fov_deg": 90, "width": 160, "height": 120, "sigma_m": 0.02, "dropout": 0.05},
        "spawn": {"xyz": [-2, 0, 1.5], "yaw_deg": 30},
        "objects": [
            {"id": 1, "label": "steel table", "context": true, "shape": "box",
             "dims": [1.2, 0.8, 0.04], "pose": {"xyz": [0, 0, 0.73]}},
            {"id": 2, "label": "green bottle", "target": true, "shape": {"prism": {"sides": 8}},
             "dims": [0.07, 0.07, 0.18], "pose": {"xyz": [0.1, 0, 0.84]}},
            {"id": 3, "label": "window wall", "shape": "box", "dims": [0.1, 1, 1],
             "pose": {"xyz": [2, 0, 0.5]},
             "parts": [{"shape": {"hull": {"vertices": [[2,1,0],[2.1,1,0],[2,1.1,0],[2,1,0.1]]}},
                        "pose": {"xyz": [0, 0, 0]}}]}
        ]
    }"#;

    #[test]
    fn parses_and_builds_scene() {
        let file = SceneFile::from_json(DOC).unwrap();
        let scene = file.to_scene().unwrap();
        assert_eq!(scene.objects.len(), 3);
        assert_eq!(scene.target().label, "green bottle");
        assert_eq!(scene.objects[2].hulls.len(), 2);
        assert!((scene.camera.fov - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!((scene.spawn.yaw() - 30f64.to_radians()).abs() < 1e-12);
        let back = SceneFile::from_json(&file.to_json().unwrap()).unwrap();
        assert_eq!(back, file);
    }

    #[test]
    fn rejects_bad_documents() {
        let mut file = SceneFile::from_json(DOC).unwrap();
        file.schema = 2;
        assert!(file.to_scene().is_err());

        let mut file = SceneFile::from_json(DOC).unwrap();
        file.objects[0].target = true;
        assert!(matches!(file.to_scene(), Err(Error::InvalidScene(_))));

        let mut file = SceneFile::from_json(DOC).unwrap();
        file.objects[2].label = "Steel Table".into();
        assert!(file.to_scene().is_err());

        let mut file = SceneFile::from_json(DOC).unwrap();
        file.objects[0].dims = None;
        assert!(file.to_scene().is_err());

        assert!(SceneFile::from_json(r#"{"schema":1}"#).is_err());
        assert!(SceneFile::from_json(&DOC.replace("\"schema\": 1,", "\"schema\": 1, \"extra\": 3,")).is_err());
    }
}
