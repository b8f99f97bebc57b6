//! Rigid-body math, half-space convex hulls, point clouds and the KD-tree
//! index shared by every planning stage.

mod cloud;
mod hull;
mod kdtree;
mod pose;

pub use cloud::{PointCloud, CLUTTER_LABEL};
pub use hull::{ConvexHull, HULL_EPS};
pub use kdtree::SpatialIndex;
pub use pose::{wrap_angle, Pose};

use nalgebra::Vector3;

/// Builds a hull from vertices; see [`ConvexHull::from_vertices`].
pub fn build_hull(vertices: &[Vector3<f64>]) -> crate::Result<ConvexHull> {
    ConvexHull::from_vertices(vertices)
}

pub fn point_in_hull(p: &Vector3<f64>, hull: &ConvexHull) -> bool {
    hull.contains(p)
}

pub fn transform_hull(hull: &ConvexHull, pose: &Pose) -> ConvexHull {
    hull.transformed(pose)
}

pub fn radius_query(index: &SpatialIndex, center: &Vector3<f64>, r: f64) -> Vec<u32> {
    index.radius_query(center, r)
}
