use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::Vector3;

const LEAF_SIZE: usize = 16;

#[derive(Clone, Debug)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// KD-tree over a point snapshot. Read-only after construction, so queries
/// may run concurrently.
///
/// Radius queries are inclusive on squared distance: index `i` is returned
/// iff `‖p_i − c‖² ≤ r²`.
#[derive(Clone, Debug)]
pub struct SpatialIndex {
    points: Vec<[f64; 3]>,
    index: Vec<u32>,
    nodes: Vec<Node>,
}

impl SpatialIndex {
    pub fn build(points: &[Vector3<f64>]) -> Self {
        let mut tree = Self {
            points: points.iter().map(|p| [p.x, p.y, p.z]).collect(),
            index: (0..points.len() as u32).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build_node(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.index[start..end] {
            let p = self.points[i as usize];
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        if hi[axis] - lo[axis] <= 0.0 {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.index[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a as usize][axis]
                .total_cmp(&points[b as usize][axis])
                .then(a.cmp(&b))
        });
        let value = self.points[self.index[mid] as usize][axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// Indices of all points within distance `r` of `center`, ascending.
    pub fn radius_query(&self, center: &Vector3<f64>, r: f64) -> Vec<u32> {
        let mut out = Vec::new();
        self.radius_query_into(center, r, &mut out);
        out.sort_unstable();
        out
    }

    /// Unsorted radius query appending to `out`.
    pub fn radius_query_into(&self, center: &Vector3<f64>, r: f64, out: &mut Vec<u32>) {
        if self.nodes.is_empty() || r < 0.0 {
            return;
        }
        let c = [center.x, center.y, center.z];
        let r2 = r * r;
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            match self.nodes[node] {
                Node::Leaf { start, end } => {
                    for &i in &self.index[start..end] {
                        let p = self.points[i as usize];
                        let d = (p[0] - c[0]) * (p[0] - c[0])
                            + (p[1] - c[1]) * (p[1] - c[1])
                            + (p[2] - c[2]) * (p[2] - c[2]);
                        if d <= r2 {
                            out.push(i);
                        }
                    }
                }
                Node::Split {
                    axis,
                    value,
                    left,
                    right,
                } => {
                    // Left holds coordinates ≤ value, right holds ≥ value.
                    let diff = c[axis] - value;
                    let gap = diff * diff;
                    if diff <= 0.0 {
                        stack.push(left);
                        if gap <= r2 {
                            stack.push(right);
                        }
                    } else {
                        stack.push(right);
                        if gap <= r2 {
                            stack.push(left);
                        }
                    }
                }
            }
        }
    }

    /// Unsorted query for points inside the closed box `[lo, hi]`, appending
    /// to `out`.
    pub fn box_query_into(&self, lo: &Vector3<f64>, hi: &Vector3<f64>, out: &mut Vec<u32>) {
        if self.nodes.is_empty() {
            return;
        }
        let inside = |p: &[f64; 3]| (0..3).all(|a| p[a] >= lo[a] && p[a] <= hi[a]);
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            match self.nodes[node] {
                Node::Leaf { start, end } => {
                    out.extend(self.index[start..end].iter().filter(|&&i| inside(&self.points[i as usize])));
                }
                Node::Split {
                    axis,
                    value,
                    left,
                    right,
                } => {
                    if lo[axis] <= value {
                        stack.push(left);
                    }
                    if hi[axis] >= value {
                        stack.push(right);
                    }
                }
            }
        }
    }

    /// The `k` nearest points to `center`, closest first; ties by index.
    pub fn nearest(&self, center: &Vector3<f64>, k: usize) -> Vec<u32> {
        if k == 0 || self.nodes.is_empty() {
            return Vec::new();
        }
        let c = [center.x, center.y, center.z];
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        self.nearest_rec(0, &c, k, &mut heap);
        let mut v = heap.into_vec();
        v.sort();
        v.into_iter().map(|c| c.index).collect()
    }

    fn nearest_rec(&self, node: usize, c: &[f64; 3], k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.index[start..end] {
                    let p = self.points[i as usize];
                    let d = (p[0] - c[0]) * (p[0] - c[0])
                        + (p[1] - c[1]) * (p[1] - c[1])
                        + (p[2] - c[2]) * (p[2] - c[2]);
                    let cand = Candidate { dist2: d, index: i };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if heap.peek().is_some_and(|worst| cand < *worst) {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = c[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.nearest_rec(near, c, k, heap);
                let worst = heap.peek().map_or(f64::INFINITY, |w| w.dist2);
                if heap.len() < k || diff * diff <= worst {
                    self.nearest_rec(far, c, k, heap);
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Candidate {
    dist2: f64,
    index: u32,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}
