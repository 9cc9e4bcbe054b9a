//! Small dense symmetric solves for the moment systems `(H + λI) β = h`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Pivots below this fraction of the largest diagonal entry are treated as zero.
pub const RELATIVE_PIVOT_THRESHOLD: f64 = 1e-12;

/// Dense symmetric `n × n` matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> SymMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![T::zero(); n * n] }
    }

    pub fn from_row_major(n: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: data.len() });
        }
        Ok(Self { n, data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    /// Adds `weight · v vᵀ`.
    pub fn add_outer(&mut self, v: &[T], weight: T) {
        debug_assert_eq!(v.len(), self.n);
        for i in 0..self.n {
            if v[i] == T::zero() {
                continue;
            }
            let wi = weight * v[i];
            let row = &mut self.data[i * self.n..(i + 1) * self.n];
            for (cell, &vj) in row.iter_mut().zip(v) {
                *cell += wi * vj;
            }
        }
    }

    pub fn scale(&mut self, s: T) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn trace(&self) -> T {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.n);
        self.data
            .chunks_exact(self.n)
            .map(|row| row.iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// `self + shift · I`.
    pub fn shifted(&self, shift: T) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            out.data[i * self.n + i] += shift;
        }
        out
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

/// Solves `a x = b` for symmetric positive-definite `a` with an LDLᵀ
/// factorization.
///
/// No square roots are taken, so a `1 × 1` system is a single division.
/// Fails with [`Error::Singular`] when a pivot drops below
/// [`RELATIVE_PIVOT_THRESHOLD`] times the largest diagonal entry.
pub fn solve_spd<T: Scalar>(a: &SymMatrix<T>, b: &[T]) -> Result<Vec<T>> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: b.len() });
    }
    let scale = (0..n).map(|i| a.get(i, i).abs()).fold(T::zero(), T::max);
    let threshold = T::lit(RELATIVE_PIVOT_THRESHOLD) * scale;

    // unit lower-triangular L, row-major; d holds the pivots
    let mut l = vec![T::zero(); n * n];
    let mut d = vec![T::zero(); n];
    for j in 0..n {
        let mut dj = a.get(j, j);
        for k in 0..j {
            dj -= l[j * n + k] * l[j * n + k] * d[k];
        }
        if !(dj > threshold) || scale == T::zero() {
            return Err(Error::Singular { column: j, pivot: dj.to_f64_lossy() });
        }
        d[j] = dj;
        l[j * n + j] = T::one();
        for i in j + 1..n {
            let mut v = a.get(i, j);
            for k in 0..j {
                v -= l[i * n + k] * l[j * n + k] * d[k];
            }
            l[i * n + j] = v / dj;
        }
    }

    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            let t = l[i * n + k] * y[k];
            y[i] -= t;
        }
    }
    for i in 0..n {
        y[i] /= d[i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            let t = l[k * n + i] * y[k];
            y[i] -= t;
        }
    }
    Ok(y)
}

pub(crate) fn max_abs<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}
