//! Nearest-neighbor geometry of matching: M-NN queries, catchment areas and
//! matched-times counts.
//!
//! Distance ties are broken by ascending reference index everywhere, so every
//! query is deterministic. Catchment membership is inclusive (`≤`).

mod brute;
mod kdtree;
mod metric;

use std::cmp::Ordering;
use std::sync::Arc;

use rayon::prelude::*;

pub use brute::{brute_knn, brute_within};
pub use kdtree::KdTree;
pub use metric::Metric;

use crate::dataset::{Arm, ObservationalDataset, TwoSampleData};
use crate::error::{Error, Result};
use crate::points::Points;
use crate::scalar::Scalar;

/// Above this dimension queries fall back to brute force.
pub const MAX_TREE_DIM: usize = 16;

pub(crate) fn cmp_candidates<T: Scalar>(a: &(T, usize), b: &(T, usize)) -> Ordering {
    a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchStrategy {
    KdTree,
    BruteForce,
}

/// Reference set, metric and match count `M`, with a spatial index.
#[derive(Debug, Clone)]
pub struct NeighborModel<T> {
    reference: Points<T>,
    metric: Metric<T>,
    m: usize,
    tree: Option<KdTree<T>>,
}

impl<T: Scalar> NeighborModel<T> {
    pub fn new(reference: Points<T>, metric: Metric<T>, m: usize) -> Result<Self> {
        let strategy = if reference.dim() > MAX_TREE_DIM {
            SearchStrategy::BruteForce
        } else {
            SearchStrategy::KdTree
        };
        Self::with_strategy(reference, metric, m, strategy)
    }

    pub fn with_strategy(reference: Points<T>, metric: Metric<T>, m: usize, strategy: SearchStrategy) -> Result<Self> {
        if m == 0 {
            return Err(Error::ZeroMatchCount);
        }
        if m > reference.len() {
            return Err(Error::MatchCountTooLarge { m, available: reference.len() });
        }
        metric.check_dim(reference.dim())?;
        let tree = match strategy {
            SearchStrategy::KdTree => Some(KdTree::build(&reference, &metric)),
            SearchStrategy::BruteForce => None,
        };
        Ok(Self { reference, metric, m, tree })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn metric(&self) -> &Metric<T> {
        &self.metric
    }

    pub fn reference(&self) -> &Points<T> {
        &self.reference
    }

    pub fn strategy(&self) -> SearchStrategy {
        if self.tree.is_some() {
            SearchStrategy::KdTree
        } else {
            SearchStrategy::BruteForce
        }
    }

    fn check_query(&self, query: &[T]) -> Result<()> {
        if query.len() != self.reference.dim() {
            return Err(Error::DimensionMismatch { expected: self.reference.dim(), found: query.len() });
        }
        Ok(())
    }

    /// The `k` nearest reference points as `(distance², index)`, any `k`.
    pub fn k_nearest(&self, query: &[T], k: usize) -> Result<Vec<(T, usize)>> {
        self.check_query(query)?;
        let k = k.min(self.reference.len());
        Ok(match &self.tree {
            Some(tree) => tree.knn(&self.reference, &self.metric, query, k),
            None => brute_knn(&self.reference, &self.metric, query, k),
        })
    }

    /// Indices of the `M` nearest reference points, nearest first.
    pub fn knn(&self, query: &[T]) -> Result<Vec<usize>> {
        Ok(self.k_nearest(query, self.m)?.into_iter().map(|(_, i)| i).collect())
    }

    /// Squared distance from `query` to its `M`-th nearest reference point.
    pub fn mth_radius2(&self, query: &[T]) -> Result<T> {
        let nn = self.k_nearest(query, self.m)?;
        Ok(nn[self.m - 1].0)
    }

    /// `‖X_(M)(query) − query‖`.
    pub fn mth_radius(&self, query: &[T]) -> Result<T> {
        self.mth_radius2(query).map(T::sqrt)
    }

    /// Whether `z ∈ A_M(x)`, i.e. `‖x − z‖ ≤ ‖X_(M)(z) − z‖`.
    pub fn catchment_contains(&self, x: &[T], z: &[T]) -> Result<bool> {
        self.check_query(x)?;
        let r2 = self.mth_radius2(z)?;
        Ok(self.metric.dist2(x, z) <= r2)
    }

    /// Reference indices within squared radius `radius2` of `query`, ascending.
    pub fn within(&self, query: &[T], radius2: T) -> Result<Vec<usize>> {
        self.check_query(query)?;
        Ok(match &self.tree {
            Some(tree) => tree.within(&self.reference, &self.metric, query, radius2),
            None => brute_within(&self.reference, &self.metric, query, radius2),
        })
    }
}

/// `K_M(X_i) = Σ_j 1(Z_j ∈ A_M(X_i))` for every denominator point, computed
/// through the catchment balls of the numerator points.
pub fn matched_times_two_sample<T: Scalar>(data: &TwoSampleData<T>, metric: &Metric<T>, m: usize) -> Result<Vec<usize>> {
    let model = NeighborModel::new(data.denominator().clone(), metric.clone(), m)?;
    let hits: Vec<Vec<usize>> = data
        .numerator()
        .rows()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|z| {
            let r2 = model.mth_radius2(z)?;
            model.within(z, r2)
        })
        .collect::<Result<_>>()?;
    let mut counts = vec![0usize; data.n_denominator()];
    for list in hits {
        for i in list {
            counts[i] += 1;
        }
    }
    Ok(counts)
}

/// `#{j : i ∈ knn(Z_j)}`; agrees with [`matched_times_two_sample`] when
/// pairwise distances are distinct.
pub fn matched_times_direct<T: Scalar>(data: &TwoSampleData<T>, metric: &Metric<T>, m: usize) -> Result<Vec<usize>> {
    let model = NeighborModel::new(data.denominator().clone(), metric.clone(), m)?;
    let mut counts = vec![0usize; data.n_denominator()];
    for z in data.numerator().rows() {
        for i in model.knn(z)? {
            counts[i] += 1;
        }
    }
    Ok(counts)
}

/// Matched sets `J_M(i)` and matched-times counts `K_M(i)` of an
/// observational dataset; indices refer to dataset units.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingStructures {
    pub m: usize,
    pub neighbors: Vec<Vec<usize>>,
    pub counts: Vec<usize>,
}

impl MatchingStructures {
    pub fn count(&self, i: usize) -> usize {
        self.counts[i]
    }

    /// `1 + K_M(i)/M`.
    pub fn weight<T: Scalar>(&self, i: usize) -> T {
        T::one() + T::count(self.counts[i]) / T::count(self.m)
    }
}

/// Per-arm neighbor models over one dataset.
#[derive(Debug, Clone)]
pub struct ArmModels<T> {
    pub treated: Arc<NeighborModel<T>>,
    pub control: Arc<NeighborModel<T>>,
}

impl<T: Scalar> ArmModels<T> {
    pub fn new(dataset: &ObservationalDataset<T>, metric: &Metric<T>, m: usize) -> Result<Self> {
        let model = |arm: Arm| {
            let pts = dataset.covariates().select(dataset.arm_indices(arm));
            NeighborModel::new(pts, metric.clone(), m).map(Arc::new)
        };
        Ok(Self { treated: model(Arm::Treated)?, control: model(Arm::Control)? })
    }

    pub fn get(&self, arm: Arm) -> &Arc<NeighborModel<T>> {
        match arm {
            Arm::Treated => &self.treated,
            Arm::Control => &self.control,
        }
    }
}

pub fn matching_structures<T: Scalar>(
    dataset: &ObservationalDataset<T>,
    metric: &Metric<T>,
    m: usize,
) -> Result<MatchingStructures> {
    let models = ArmModels::new(dataset, metric, m)?;
    matching_structures_with(dataset, &models)
}

/// [`matching_structures`] over prebuilt arm models.
pub fn matching_structures_with<T: Scalar>(
    dataset: &ObservationalDataset<T>,
    models: &ArmModels<T>,
) -> Result<MatchingStructures> {
    let m = models.treated.m();
    let neighbors: Vec<Vec<usize>> = (0..dataset.len())
        .into_par_iter()
        .map(|i| {
            let other = dataset.arm(i).opposite();
            let global = dataset.arm_indices(other);
            Ok(models.get(other).knn(dataset.x(i))?.into_iter().map(|k| global[k]).collect())
        })
        .collect::<Result<_>>()?;
    let mut counts = vec![0usize; dataset.len()];
    for list in &neighbors {
        for &j in list {
            counts[j] += 1;
        }
    }
    Ok(MatchingStructures { m, neighbors, counts })
}
