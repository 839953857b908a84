//! The dataset of queried points with an exact nearest-neighbor index.
//!
//! The index is a static kd-tree plus an insertion buffer: new points land in
//! the buffer (scanned linearly) and the tree is rebuilt whenever the buffer
//! exceeds a quarter of the tree size, keeping amortized query cost
//! logarithmic. Queries take `&self`, insertions `&mut self`, so the borrow
//! checker enforces the snapshot-then-write discipline between walk batches.

use crate::geometry::{dist2, Point};
use thiserror::Error;

/// Two points closer than this are considered the same query point.
pub const DUPLICATE_EPS: f64 = 1e-12;

/// Rebuild the tree when `buffer > tree_len / REBUILD_DIVISOR`.
const REBUILD_DIVISOR: usize = 4;

#[derive(Debug, Error)]
pub enum SpatialError {
    #[error("empty dataset")]
    Empty,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("duplicate point (within {DUPLICATE_EPS:e} of dataset index {existing})")]
    Duplicate { existing: usize },
    #[error("no candidates left after exclusions")]
    AllExcluded,
}

const NONE: u32 = u32::MAX;

struct Node {
    /// Dataset index of the point stored at this node.
    idx: u32,
    left: u32,
    right: u32,
}

/// Queried points, their function values and the nearest-neighbor index.
pub struct Dataset {
    points: Vec<Point>,
    values: Vec<f64>,
    dim: usize,
    nodes: Vec<Node>,
    root: u32,
    /// Indices not yet in the tree; scanned linearly by every query.
    buffer: Vec<usize>,
    /// Componentwise bounds over the tree's points, for branch-and-bound.
    tree_lo: Vec<f64>,
    tree_hi: Vec<f64>,
}

impl Dataset {
    /// Builds the index over an initial set of evaluated points.
    pub fn build(points: Vec<Point>, values: Vec<f64>) -> Result<Self, SpatialError> {
        if points.is_empty() {
            return Err(SpatialError::Empty);
        }
        assert_eq!(points.len(), values.len(), "one value per point");
        let dim = points[0].len();
        for p in &points {
            if p.len() != dim {
                return Err(SpatialError::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
        }
        let mut ds = Self {
            points,
            values,
            dim,
            nodes: Vec::new(),
            root: NONE,
            buffer: Vec::new(),
            tree_lo: Vec::new(),
            tree_hi: Vec::new(),
        };
        ds.rebuild();
        // Exact duplicate detection via the fresh tree: O(n log n).
        for i in 0..ds.len() {
            if ds.len() > 1 {
                let (j, d) = ds.nearest(&ds.points[i].clone(), &[i])?;
                if d < DUPLICATE_EPS {
                    return Err(SpatialError::Duplicate { existing: j.min(i) });
                }
            }
        }
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Inserts an evaluated point; subsequent queries see it immediately.
    /// Rejects near-duplicates so the engine can skip converged candidates.
    pub fn insert(&mut self, point: Point, value: f64) -> Result<usize, SpatialError> {
        if point.len() != self.dim {
            return Err(SpatialError::DimensionMismatch {
                expected: self.dim,
                got: point.len(),
            });
        }
        let (j, d) = self.nearest(&point, &[])?;
        if d < DUPLICATE_EPS {
            return Err(SpatialError::Duplicate { existing: j });
        }
        let idx = self.points.len();
        self.points.push(point);
        self.values.push(value);
        self.buffer.push(idx);
        if self.buffer.len() * REBUILD_DIVISOR > self.nodes.len() {
            self.rebuild();
        }
        Ok(idx)
    }

    /// Exact nearest neighbor among non-excluded points. Ties break toward
    /// the lowest dataset index. Returns `(index, euclidean distance)`.
    pub fn nearest(&self, query: &[f64], exclude: &[usize]) -> Result<(usize, f64), SpatialError> {
        debug_assert_eq!(query.len(), self.dim);
        let mut best: (f64, usize) = (f64::INFINITY, usize::MAX);
        if self.root != NONE {
            self.nearest_rec(self.root, 0, query, exclude, &mut best);
        }
        for &i in &self.buffer {
            if !exclude.contains(&i) {
                consider(&mut best, dist2(query, &self.points[i]), i);
            }
        }
        if best.1 == usize::MAX {
            return Err(SpatialError::AllExcluded);
        }
        Ok((best.1, best.0.sqrt()))
    }

    fn nearest_rec(
        &self,
        node: u32,
        depth: usize,
        query: &[f64],
        exclude: &[usize],
        best: &mut (f64, usize),
    ) {
        let n = &self.nodes[node as usize];
        let idx = n.idx as usize;
        if !exclude.contains(&idx) {
            consider(best, dist2(query, &self.points[idx]), idx);
        }
        let axis = depth % self.dim;
        let diff = query[axis] - self.points[idx][axis];
        let (near, far) = if diff <= 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        if near != NONE {
            self.nearest_rec(near, depth + 1, query, exclude, best);
        }
        // Equal slab distance may still hide an equidistant lower index.
        if far != NONE && diff * diff <= best.0 {
            self.nearest_rec(far, depth + 1, query, exclude, best);
        }
    }

    /// Argmax of `dir . q` over non-excluded points, by branch and bound on
    /// the tree regions. Used by the ray caster to decide whether a ray can
    /// cross any bisector at all.
    pub fn max_dot(&self, dir: &[f64], exclude: &[usize]) -> Option<(usize, f64)> {
        let mut best: (f64, usize) = (f64::NEG_INFINITY, usize::MAX);
        if self.root != NONE {
            let mut lo = self.tree_lo.clone();
            let mut hi = self.tree_hi.clone();
            self.max_dot_rec(self.root, 0, dir, exclude, &mut lo, &mut hi, &mut best);
        }
        for &i in &self.buffer {
            if !exclude.contains(&i) {
                let d = crate::geometry::dot(dir, &self.points[i]);
                if d > best.0 {
                    best = (d, i);
                }
            }
        }
        (best.1 != usize::MAX).then_some((best.1, best.0))
    }

    #[allow(clippy::too_many_arguments)]
    fn max_dot_rec(
        &self,
        node: u32,
        depth: usize,
        dir: &[f64],
        exclude: &[usize],
        lo: &mut [f64],
        hi: &mut [f64],
        best: &mut (f64, usize),
    ) {
        let ub: f64 = dir
            .iter()
            .enumerate()
            .map(|(i, d)| (d * lo[i]).max(d * hi[i]))
            .sum();
        if ub <= best.0 {
            return;
        }
        let n = &self.nodes[node as usize];
        let idx = n.idx as usize;
        if !exclude.contains(&idx) {
            let d = crate::geometry::dot(dir, &self.points[idx]);
            if d > best.0 {
                *best = (d, idx);
            }
        }
        let axis = depth % self.dim;
        let split = self.points[idx][axis];
        // Visit the more promising half first.
        let order = if dir[axis] >= 0.0 {
            [(n.right, false), (n.left, true)]
        } else {
            [(n.left, true), (n.right, false)]
        };
        for (child, is_left) in order {
            if child == NONE {
                continue;
            }
            if is_left {
                let saved = hi[axis];
                hi[axis] = split;
                self.max_dot_rec(child, depth + 1, dir, exclude, lo, hi, best);
                hi[axis] = saved;
            } else {
                let saved = lo[axis];
                lo[axis] = split;
                self.max_dot_rec(child, depth + 1, dir, exclude, lo, hi, best);
                lo[axis] = saved;
            }
        }
    }

    fn rebuild(&mut self) {
        let n = self.points.len();
        let mut order: Vec<u32> = (0..n as u32).collect();
        self.nodes.clear();
        self.nodes.reserve(n);
        self.buffer.clear();
        self.root = self.build_rec(&mut order, 0);
        self.tree_lo = vec![f64::INFINITY; self.dim];
        self.tree_hi = vec![f64::NEG_INFINITY; self.dim];
        for p in &self.points {
            for ((lo, hi), x) in self.tree_lo.iter_mut().zip(&mut self.tree_hi).zip(p) {
                *lo = lo.min(*x);
                *hi = hi.max(*x);
            }
        }
    }

    fn build_rec(&mut self, order: &mut [u32], depth: usize) -> u32 {
        if order.is_empty() {
            return NONE;
        }
        let axis = depth % self.dim;
        let mid = order.len() / 2;
        let points = &self.points;
        order.select_nth_unstable_by(mid, |&a, &b| {
            points[a as usize][axis].total_cmp(&points[b as usize][axis])
        });
        let idx = order[mid];
        let node_pos = self.nodes.len() as u32;
        self.nodes.push(Node {
            idx,
            left: NONE,
            right: NONE,
        });
        let (left_half, rest) = order.split_at_mut(mid);
        let left = self.build_rec(left_half, depth + 1);
        let right = self.build_rec(&mut rest[1..], depth + 1);
        let node = &mut self.nodes[node_pos as usize];
        node.left = left;
        node.right = right;
        node_pos
    }
}

fn consider(best: &mut (f64, usize), d2: f64, idx: usize) {
    if d2 < best.0 || (d2 == best.0 && idx < best.1) {
        *best = (d2, idx);
    }
}
