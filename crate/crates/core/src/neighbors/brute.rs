use super::{cmp_candidates, Metric};
use crate::points::Points;
use crate::scalar::Scalar;

/// Exhaustive k-NN: every reference point is scored and the list is sorted
/// by `(distance², index)`. Kept as the oracle for the tree and as the
/// fallback in high dimension.
pub fn brute_knn<T: Scalar>(reference: &Points<T>, metric: &Metric<T>, query: &[T], k: usize) -> Vec<(T, usize)> {
    let mut all: Vec<(T, usize)> = reference
        .rows()
        .enumerate()
        .map(|(i, p)| (metric.dist2(p, query), i))
        .collect();
    all.sort_by(cmp_candidates);
    all.truncate(k);
    all
}

pub fn brute_within<T: Scalar>(reference: &Points<T>, metric: &Metric<T>, query: &[T], radius2: T) -> Vec<usize> {
    reference
        .rows()
        .enumerate()
        .filter(|(_, p)| metric.dist2(p, query) <= radius2)
        .map(|(i, _)| i)
        .collect()
}
