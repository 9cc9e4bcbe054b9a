use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Distance used for matching.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Metric<T> {
    #[default]
    Euclidean,
    /// `sqrt(Σ w_k (x_k − y_k)²)` with strictly positive weights.
    WeightedEuclidean(Vec<T>),
}

impl<T: Scalar> Metric<T> {
    pub fn weighted(weights: Vec<T>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(*w > T::zero()) || !w.is_finite()) {
            return Err(Error::InvalidInput("metric weights must be positive and finite".into()));
        }
        Ok(Metric::WeightedEuclidean(weights))
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        match self {
            Metric::Euclidean => Ok(()),
            Metric::WeightedEuclidean(w) if w.len() == dim => Ok(()),
            Metric::WeightedEuclidean(w) => Err(Error::DimensionMismatch { expected: dim, found: w.len() }),
        }
    }

    /// Squared distance. Symmetric bit-for-bit, since `(a − b)² = (b − a)²`
    /// exactly in IEEE arithmetic.
    #[inline]
    pub fn dist2(&self, a: &[T], b: &[T]) -> T {
        match self {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .fold(T::zero(), |acc, (&u, &v)| acc + (u - v) * (u - v)),
            Metric::WeightedEuclidean(w) => a
                .iter()
                .zip(b)
                .zip(w)
                .fold(T::zero(), |acc, ((&u, &v), &wk)| acc + wk * (u - v) * (u - v)),
        }
    }

    #[inline]
    pub fn distance(&self, a: &[T], b: &[T]) -> T {
        self.dist2(a, b).sqrt()
    }

    /// Squared distance contributed by a separation `delta` along `axis` alone.
    #[inline]
    pub(crate) fn axis_dist2(&self, axis: usize, delta: T) -> T {
        match self {
            Metric::Euclidean => delta * delta,
            Metric::WeightedEuclidean(w) => w[axis] * delta * delta,
        }
    }
}

impl<T: Scalar> FromStr for Metric<T> {
    type Err = Error;

    /// `euclidean` or `weighted:W0,W1,...`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "euclidean" {
            return Ok(Metric::Euclidean);
        }
        let Some(list) = s.strip_prefix("weighted:") else {
            return Err(Error::InvalidInput(format!("unknown metric `{s}`")));
        };
        let weights = list
            .split(',')
            .map(|w| w.trim().parse::<T>().map_err(|_| Error::InvalidInput(format!("bad metric weight `{w}`"))))
            .collect::<Result<Vec<T>>>()?;
        Metric::weighted(weights)
    }
}
