use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label carried by points that belong to no scene object.
pub const CLUTTER_LABEL: u32 = u32::MAX;

/// World-frame point set with optional per-point object labels and the
/// image pixel `(u, v)` each point was back-projected from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub labels: Option<Vec<u32>>,
    pub pixels: Option<Vec<[u32; 2]>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>) -> Result<Self> {
        if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InsufficientInput("point cloud has non-finite coordinates".into()));
        }
        Ok(Self {
            points,
            labels: None,
            pixels: None,
        })
    }

    pub fn labeled(points: Vec<Vector3<f64>>, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != points.len() {
            return Err(Error::InsufficientInput("label count does not match point count".into()));
        }
        let mut cloud = Self::new(points)?;
        cloud.labels = Some(labels);
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn label(&self, i: usize) -> Option<u32> {
        self.labels.as_ref().map(|l| l[i])
    }

    pub fn pixel(&self, i: usize) -> Option<[u32; 2]> {
        self.pixels.as_ref().map(|p| p[i])
    }

    pub fn centroid(&self) -> Option<Vector3<f64>> {
        if self.points.is_empty() {
            return None;
        }
        Some(self.points.iter().sum::<Vector3<f64>>() / self.points.len() as f64)
    }

    /// Sub-cloud of the points whose label equals `label`.
    pub fn with_label(&self, label: u32) -> PointCloud {
        self.filter(|i| self.label(i) == Some(label))
    }

    /// Sub-cloud of the indices accepted by `keep`, preserving order and
    /// per-point metadata.
    pub fn filter(&self, keep: impl Fn(usize) -> bool) -> PointCloud {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        PointCloud {
            points: idx.iter().map(|&i| self.points[i]).collect(),
            labels: self.labels.as_ref().map(|l| idx.iter().map(|&i| l[i]).collect()),
            pixels: self.pixels.as_ref().map(|p| idx.iter().map(|&i| p[i]).collect()),
        }
    }

    /// Appends `other`; metadata survives only if both clouds carry it.
    pub fn extend(&mut self, other: &PointCloud) {
        let n = self.len();
        self.labels = match (self.labels.take(), &other.labels) {
            (Some(mut a), Some(b)) => {
                a.extend_from_slice(b);
                Some(a)
            }
            (None, Some(b)) if n == 0 => Some(b.clone()),
            _ => None,
        };
        self.pixels = match (self.pixels.take(), &other.pixels) {
            (Some(mut a), Some(b)) => {
                a.extend_from_slice(b);
                Some(a)
            }
            (None, Some(b)) if n == 0 => Some(b.clone()),
            _ => None,
        };
        self.points.extend_from_slice(&other.points);
    }
}
