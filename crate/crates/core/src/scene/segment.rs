use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::Scene;
use crate::error::{Error, Result};
use crate::geometry::PointCloud;

/// Minimum visible pixels for a detection.
pub const DEFAULT_MIN_MASK_PIXELS: usize = 20;

/// Pixel set over the image grid, stored as sorted row-major indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentationMask {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u32>,
    /// Object the prompt resolved to; `None` for unknown labels.
    pub object_id: Option<u32>,
}

impl SegmentationMask {
    pub fn empty(width: u32, height: u32, object_id: Option<u32>) -> Self {
        Self {
            width,
            height,
            pixels: Vec::new(),
            object_id,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn contains(&self, u: u32, v: u32) -> bool {
        u < self.width && v < self.height && self.pixels.binary_search(&(v * self.width + u)).is_ok()
    }
}

/// Oracle segmentation: the pixels whose point carries the id of the object
/// labeled `prompt`. Fewer than `min_pixels` matches yield an empty mask.
pub fn segment(cloud: &PointCloud, prompt: &str, scene: &Scene, min_pixels: usize) -> SegmentationMask {
    let (w, h) = (scene.camera.width, scene.camera.height);
    let Some(obj) = scene.object_by_label(prompt) else {
        return SegmentationMask::empty(w, h, None);
    };
    let (Some(labels), Some(px)) = (&cloud.labels, &cloud.pixels) else {
        return SegmentationMask::empty(w, h, Some(obj.id));
    };
    let mut pixels: Vec<u32> = labels
        .iter()
        .zip(px)
        .filter(|(l, _)| **l == obj.id)
        .map(|(_, [u, v])| v * w + u)
        .collect();
    if pixels.len() < min_pixels.max(1) {
        return SegmentationMask::empty(w, h, Some(obj.id));
    }
    pixels.sort_unstable();
    pixels.dedup();
    SegmentationMask {
        width: w,
        height: h,
        pixels,
        object_id: Some(obj.id),
    }
}

/// World-frame points of `cloud` whose pixel lies in `mask`, in cloud order.
pub fn mask_points(mask: &SegmentationMask, cloud: &PointCloud) -> Vec<Vector3<f64>> {
    let Some(px) = &cloud.pixels else {
        return Vec::new();
    };
    cloud
        .points
        .iter()
        .zip(px)
        .filter(|(_, [u, v])| mask.contains(*u, *v))
        .map(|(p, _)| *p)
        .collect()
}

/// Mean of the points under the mask.
pub fn mask_centroid(mask: &SegmentationMask, cloud: &PointCloud) -> Result<Vector3<f64>> {
    let pts = mask_points(mask, cloud);
    if pts.is_empty() {
        return Err(Error::InsufficientInput("segmentation mask is empty".into()));
    }
    Ok(pts.iter().sum::<Vector3<f64>>() / pts.len() as f64)
}
