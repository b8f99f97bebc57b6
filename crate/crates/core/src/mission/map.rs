use std::collections::HashMap;

use nalgebra::Vector3;

type Key = [i64; 3];

fn key(p: &Vector3<f64>, voxel: f64) -> Key {
    [
        (p.x / voxel).floor() as i64,
        (p.y / voxel).floor() as i64,
        (p.z / voxel).floor() as i64,
    ]
}

/// Voxel grid keeping the running mean of the points in each cell.
/// Snapshots are emitted in key order, so they are deterministic.
#[derive(Clone, Debug)]
pub struct VoxelMap {
    voxel: f64,
    cells: HashMap<Key, (Vector3<f64>, u32)>,
}

impl VoxelMap {
    pub fn new(voxel: f64) -> Self {
        Self {
            voxel,
            cells: HashMap::new(),
        }
    }

    pub fn insert(&mut self, p: &Vector3<f64>) {
        let e = self.cells.entry(key(p, self.voxel)).or_insert((Vector3::zeros(), 0));
        e.0 += p;
        e.1 += 1;
    }

    pub fn extend<'a>(&mut self, pts: impl IntoIterator<Item = &'a Vector3<f64>>) {
        for p in pts {
            self.insert(p);
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn points(&self) -> Vec<Vector3<f64>> {
        self.points_where(|_, _| true)
    }

    /// Cell means within `radius` of `center`, in key order.
    pub fn points_near(&self, center: &Vector3<f64>, radius: f64) -> Vec<Vector3<f64>> {
        self.points_where(|p, _| (p - center).norm_squared() <= radius * radius)
    }

    /// Cell means of cells holding at least `fraction` of the fullest
    /// cell's count, in key order.
    pub fn supported_points(&self, fraction: f64) -> Vec<Vector3<f64>> {
        let max = self.cells.values().map(|c| c.1).max().unwrap_or(0);
        let min = (fraction * max as f64).ceil() as u32;
        self.points_where(|_, n| n >= min)
    }

    fn points_where(&self, keep: impl Fn(&Vector3<f64>, u32) -> bool) -> Vec<Vector3<f64>> {
        let mut cells: Vec<(Key, Vector3<f64>)> = self
            .cells
            .iter()
            .map(|(k, (s, n))| (*k, s / *n as f64, *n))
            .filter(|(_, p, n)| keep(p, *n))
            .map(|(k, p, _)| (k, p))
            .collect();
        cells.sort_unstable_by_key(|(k, _)| *k);
        cells.into_iter().map(|(_, p)| p).collect()
    }
}
