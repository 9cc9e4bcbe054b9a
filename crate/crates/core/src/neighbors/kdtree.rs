use std::cmp::Ordering;

use super::{cmp_candidates, Metric};
use crate::points::Points;
use crate::scalar::Scalar;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node<T> {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: T, left: usize, right: usize },
}

/// Static k-d tree over a reference set.
///
/// Points left of a split have coordinate `≤ value` on the split axis and
/// points right of it `≥ value`. Subtrees are only skipped when their lower
/// bound is strictly worse than the current k-th candidate, so exact
/// distance ties are still resolved by ascending index.
#[derive(Debug, Clone)]
pub struct KdTree<T> {
    nodes: Vec<Node<T>>,
    order: Vec<usize>,
}

impl<T: Scalar> KdTree<T> {
    pub fn build(points: &Points<T>, metric: &Metric<T>) -> Self {
        let mut tree = Self { nodes: Vec::new(), order: (0..points.len()).collect() };
        if !points.is_empty() {
            tree.build_node(points, metric, 0, points.len());
        }
        tree
    }

    fn build_node(&mut self, points: &Points<T>, metric: &Metric<T>, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { start, end });
        if end - start <= LEAF_SIZE {
            return id;
        }
        // widest weighted spread
        let dim = points.dim();
        let mut best = (T::zero(), 0);
        for axis in 0..dim {
            let (lo, hi) = self.order[start..end].iter().fold(
                (T::infinity(), T::neg_infinity()),
                |(lo, hi), &i| {
                    let v = points.row(i)[axis];
                    (lo.min(v), hi.max(v))
                },
            );
            let spread = metric.axis_dist2(axis, hi - lo);
            if spread > best.0 {
                best = (spread, axis);
            }
        }
        if best.0 == T::zero() {
            return id; // all points coincide
        }
        let axis = best.1;
        let mid = start + (end - start) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points.row(a)[axis].partial_cmp(&points.row(b)[axis]).unwrap_or(Ordering::Equal)
        });
        let value = points.row(self.order[mid])[axis];
        let left = self.build_node(points, metric, start, mid);
        let right = self.build_node(points, metric, mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    /// The `k` nearest points sorted by `(distance², index)`.
    pub fn knn(&self, points: &Points<T>, metric: &Metric<T>, query: &[T], k: usize) -> Vec<(T, usize)> {
        let mut best: Vec<(T, usize)> = Vec::with_capacity(k + 1);
        if k > 0 && !self.nodes.is_empty() {
            self.knn_node(0, points, metric, query, k, &mut best);
        }
        best
    }

    fn knn_node(
        &self,
        node: usize,
        points: &Points<T>,
        metric: &Metric<T>,
        query: &[T],
        k: usize,
        best: &mut Vec<(T, usize)>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let cand = (metric.dist2(points.row(i), query), i);
                    if best.len() == k && cmp_candidates(&cand, &best[k - 1]) != Ordering::Less {
                        continue;
                    }
                    let pos = best
                        .binary_search_by(|probe| cmp_candidates(probe, &cand))
                        .unwrap_or_else(|p| p);
                    best.insert(pos, cand);
                    best.truncate(k);
                }
            }
            Node::Split { axis, value, left, right } => {
                let delta = query[axis] - value;
                let (near, far) = if delta <= T::zero() { (left, right) } else { (right, left) };
                self.knn_node(near, points, metric, query, k, best);
                let bound = metric.axis_dist2(axis, delta);
                if best.len() < k || bound <= best[best.len() - 1].0 {
                    self.knn_node(far, points, metric, query, k, best);
                }
            }
        }
    }

    /// Indices of all points with `distance² ≤ radius2`, ascending.
    pub fn within(&self, points: &Points<T>, metric: &Metric<T>, query: &[T], radius2: T) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.nodes.is_empty() {
            self.within_node(0, points, metric, query, radius2, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn within_node(
        &self,
        node: usize,
        points: &Points<T>,
        metric: &Metric<T>,
        query: &[T],
        radius2: T,
        out: &mut Vec<usize>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                out.extend(
                    self.order[start..end]
                        .iter()
                        .copied()
                        .filter(|&i| metric.dist2(points.row(i), query) <= radius2),
                );
            }
            Node::Split { axis, value, left, right } => {
                let delta = query[axis] - value;
                let (near, far) = if delta <= T::zero() { (left, right) } else { (right, left) };
                self.within_node(near, points, metric, query, radius2, out);
                if metric.axis_dist2(axis, delta) <= radius2 {
                    self.within_node(far, points, metric, query, radius2, out);
                }
            }
        }
    }
}
