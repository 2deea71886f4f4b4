//! Static 3D kd-tree for k-nearest-neighbour and radius queries.
//!
//! Results are exact and ordered by `(squared distance, index)`, so ties
//! resolve to the lower point index just like an exhaustive scan.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::cloud::{Point, PointCloud};
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 12;

#[derive(Debug)]
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

#[derive(Debug)]
pub struct KdTree {
    /// Coordinates permuted into tree order.
    coords: Vec<[f64; 3]>,
    /// Original index of each entry in `coords`.
    indices: Vec<usize>,
    nodes: Vec<Node>,
}

/// A query hit: original point index and squared distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance_squared: f64,
}

impl Neighbor {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.distance_squared
            .total_cmp(&other.distance_squared)
            .then(self.index.cmp(&other.index))
    }
}

impl Eq for Neighbor {}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key_cmp(other)
    }
}

#[inline]
fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

impl KdTree {
    pub fn new(cloud: &PointCloud) -> Self {
        Self::from_coords(cloud.points.iter().map(|p| [p.x, p.y, p.z]).collect())
    }

    pub fn from_coords(coords: Vec<[f64; 3]>) -> Self {
        let n = coords.len();
        let mut tree = KdTree {
            coords,
            indices: (0..n).collect(),
            nodes: Vec::with_capacity(2 * n / LEAF_SIZE + 1),
        };
        if n > 0 {
            tree.build(0, n);
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for c in &self.coords[start..end] {
            for a in 0..3 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        if hi[axis] - lo[axis] == 0.0 {
            // All coincident: no split can separate them.
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }

        let mid = start + (end - start) / 2;
        let mut order: Vec<usize> = (start..end).collect();
        order.select_nth_unstable_by(mid - start, |&i, &j| {
            self.coords[i][axis].total_cmp(&self.coords[j][axis])
        });
        let coords: Vec<[f64; 3]> = order.iter().map(|&i| self.coords[i]).collect();
        let indices: Vec<usize> = order.iter().map(|&i| self.indices[i]).collect();
        self.coords[start..end].copy_from_slice(&coords);
        self.indices[start..end].copy_from_slice(&indices);
        let value = self.coords[mid][axis];

        self.nodes.push(Node::Leaf { start, end });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// The `k` nearest points to `query`, ascending by distance then index.
    pub fn knn(&self, query: &[f64; 3], k: usize) -> Vec<Neighbor> {
        if k == 0 || self.is_empty() {
            return Vec::new();
        }
        let k = k.min(self.len());
        let mut heap: BinaryHeap<Neighbor> = BinaryHeap::with_capacity(k + 1);
        self.knn_visit(0, query, k, &mut heap);
        let mut out = heap.into_vec();
        out.sort_unstable();
        out
    }

    fn knn_visit(&self, node: usize, q: &[f64; 3], k: usize, heap: &mut BinaryHeap<Neighbor>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for i in start..end {
                    let cand = Neighbor {
                        index: self.indices[i],
                        distance_squared: dist2(&self.coords[i], q),
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if let Some(top) = heap.peek() {
                        if cand < *top {
                            heap.pop();
                            heap.push(cand);
                        }
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.knn_visit(near, q, k, heap);
                // `<=` keeps equal-distance candidates with lower indices reachable.
                let bound = heap.peek().map_or(f64::INFINITY, |n| n.distance_squared);
                if heap.len() < k || diff * diff <= bound {
                    self.knn_visit(far, q, k, heap);
                }
            }
        }
    }

    /// Nearest point, if any lies within `max_distance_squared`.
    pub fn nearest_within(&self, query: &[f64; 3], max_distance_squared: f64) -> Option<Neighbor> {
        let mut best: Option<Neighbor> = None;
        let mut bound = max_distance_squared;
        if !self.is_empty() {
            self.nearest_visit(0, query, &mut bound, &mut best);
        }
        best
    }

    fn nearest_visit(
        &self,
        node: usize,
        q: &[f64; 3],
        bound: &mut f64,
        best: &mut Option<Neighbor>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for i in start..end {
                    let d = dist2(&self.coords[i], q);
                    if d > *bound {
                        continue;
                    }
                    let cand = Neighbor {
                        index: self.indices[i],
                        distance_squared: d,
                    };
                    if best.is_none_or(|b| cand < b) {
                        *best = Some(cand);
                        *bound = d;
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.nearest_visit(near, q, bound, best);
                if diff * diff <= *bound {
                    self.nearest_visit(far, q, bound, best);
                }
            }
        }
    }

    /// All points within `radius` (inclusive), ascending by distance then index.
    pub fn within_radius(&self, query: &[f64; 3], radius: f64) -> Vec<Neighbor> {
        let mut out = Vec::new();
        if !self.is_empty() && radius >= 0.0 {
            self.radius_visit(0, query, radius * radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn radius_visit(&self, node: usize, q: &[f64; 3], r2: f64, out: &mut Vec<Neighbor>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for i in start..end {
                    let d = dist2(&self.coords[i], q);
                    if d <= r2 {
                        out.push(Neighbor {
                            index: self.indices[i],
                            distance_squared: d,
                        });
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.radius_visit(near, q, r2, out);
                if diff * diff <= r2 {
                    self.radius_visit(far, q, r2, out);
                }
            }
        }
    }
}

/// Indices of the `min(k, N)` nearest points to `query`, ascending by
/// distance with ties broken by lower index.
pub fn knn(cloud: &PointCloud, query: &Point, k: usize) -> Result<Vec<usize>> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let tree = KdTree::new(cloud);
    Ok(tree
        .knn(&[query.x, query.y, query.z], k)
        .into_iter()
        .map(|n| n.index)
        .collect())
}
