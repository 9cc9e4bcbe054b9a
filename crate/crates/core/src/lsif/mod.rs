//! Least-squares importance fitting.
//!
//! The density ratio `r₀ = f₁/f₀` is modelled as `r_β(x) = βᵀΦ(x)` and `β`
//! minimizes the empirical risk
//!
//! ```text
//! J(β) = ½ βᵀĤβ − βᵀĥ + (λ/2)‖β‖²,   Ĥ = (1/N₀) Σ Φ(X_i)Φ(X_i)ᵀ,   ĥ = (1/N₁) Σ Φ(Z_j)
//! ```
//!
//! whose minimizer is `β̂ = (Ĥ + λI)⁻¹ĥ`. With the one-dimensional catchment
//! indicator `Φ_c(x) = 1(x ∈ A_M(c))` and `λ = 0` this reduces to
//! `(N₀/N₁)·K_M(c)/|{i : X_i ∈ A_M(c)}|`.

mod basis;

use std::sync::Arc;

pub use basis::{
    Basis, ConstantBasis, GaussianBasis, IndicatorBasis, IndicatorRegion, PolynomialBasis, MAX_POLYNOMIAL_DEGREE,
};

use crate::dataset::TwoSampleData;
use crate::error::{Error, Result};
use crate::linalg::{max_abs, solve_spd, SymMatrix};
use crate::neighbors::{Metric, NeighborModel};
use crate::points::Points;
use crate::scalar::Scalar;

/// Relative ridge used for general bases when no `λ` is given:
/// `1e-6 · trace(Ĥ) / b`.
pub const AUTO_LAMBDA_SCALE: f64 = 1e-6;

/// Fitted LSIF model.
#[derive(Debug, Clone)]
pub struct LsifFit<T> {
    pub basis: Arc<dyn Basis<T>>,
    pub lambda: T,
    pub h_matrix: SymMatrix<T>,
    pub h_vector: Vec<T>,
    pub beta: Vec<T>,
}

/// `(1/n) Σ w_i Φ(x_i)Φ(x_i)ᵀ` over rows with nonzero `w_i`, and the
/// feature sum. Entries are accumulated as sums and divided by `n` once, so
/// for 0/1 features `Ĥ` is exactly `count / n`.
pub(crate) fn accumulate_outer<T: Scalar, B: Basis<T> + ?Sized>(
    basis: &B,
    rows: impl Iterator<Item = (bool, impl AsRef<[T]>)>,
    n: usize,
) -> Result<(SymMatrix<T>, Vec<T>)> {
    let b = basis.size();
    let mut outer = SymMatrix::zeros(b);
    let mut sum = vec![T::zero(); b];
    let mut phi = vec![T::zero(); b];
    for (include_outer, x) in rows {
        basis.evaluate_into(x.as_ref(), &mut phi)?;
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteBasis);
        }
        if include_outer {
            outer.add_outer(&phi, T::one());
        }
        for (s, &v) in sum.iter_mut().zip(&phi) {
            *s += v;
        }
    }
    let nn = T::count(n);
    let data: Vec<T> = outer.as_slice().iter().map(|&v| v / nn).collect();
    let outer = SymMatrix::from_row_major(b, data)?;
    let sum = sum.into_iter().map(|v| v / nn).collect();
    Ok((outer, sum))
}

/// Empirical LSIF moments `(Ĥ, ĥ)`.
pub fn moments<T: Scalar, B: Basis<T> + ?Sized>(data: &TwoSampleData<T>, basis: &B) -> Result<(SymMatrix<T>, Vec<T>)> {
    check_basis_dim(basis, data.dim())?;
    let (h_matrix, _) = accumulate_outer(basis, data.denominator().rows().map(|x| (true, x)), data.n_denominator())?;
    let (_, h_vector) = accumulate_outer(basis, data.numerator().rows().map(|z| (false, z)), data.n_numerator())?;
    Ok((h_matrix, h_vector))
}

pub(crate) fn check_basis_dim<T: Scalar, B: Basis<T> + ?Sized>(basis: &B, dim: usize) -> Result<()> {
    if basis.input_dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: basis.input_dim() });
    }
    Ok(())
}

pub(crate) fn check_lambda<T: Scalar>(lambda: T) -> Result<()> {
    if !(lambda >= T::zero()) || !lambda.is_finite() {
        return Err(Error::InvalidInput("lambda must be a finite nonnegative number".into()));
    }
    Ok(())
}

/// `(Ĥ + λI)⁻¹ĥ`; a singular `Ĥ` at `λ = 0` is reported, not regularized.
pub fn solve_ridge<T: Scalar>(h_matrix: &SymMatrix<T>, h_vector: &[T], lambda: T) -> Result<Vec<T>> {
    check_lambda(lambda)?;
    solve_spd(&h_matrix.shifted(lambda), h_vector)
}

/// `1e-6 · trace(Ĥ) / b`.
pub fn auto_lambda<T: Scalar>(h_matrix: &SymMatrix<T>) -> T {
    T::lit(AUTO_LAMBDA_SCALE) * h_matrix.trace() / T::count(h_matrix.dim().max(1))
}

pub fn fit<T: Scalar>(data: &TwoSampleData<T>, basis: Arc<dyn Basis<T>>, lambda: T) -> Result<LsifFit<T>> {
    let (h_matrix, h_vector) = moments(data, basis.as_ref())?;
    let beta = solve_ridge(&h_matrix, &h_vector, lambda)?;
    Ok(LsifFit { basis, lambda, h_matrix, h_vector, beta })
}

/// Like [`fit`], with `λ = 0` for indicator bases and [`auto_lambda`] otherwise.
pub fn fit_default_lambda<T: Scalar>(data: &TwoSampleData<T>, basis: Arc<dyn Basis<T>>) -> Result<LsifFit<T>> {
    let (h_matrix, h_vector) = moments(data, basis.as_ref())?;
    let lambda = if basis.is_indicator() { T::zero() } else { auto_lambda(&h_matrix) };
    let beta = solve_ridge(&h_matrix, &h_vector, lambda)?;
    Ok(LsifFit { basis, lambda, h_matrix, h_vector, beta })
}

impl<T: Scalar> LsifFit<T> {
    /// `β̂ᵀΦ(x)`.
    pub fn predict(&self, x: &[T]) -> Result<T> {
        let phi = self.basis.evaluate(x)?;
        Ok(dot(&self.beta, &phi))
    }

    /// `J(β)` from the stored moments.
    pub fn objective(&self, beta: &[T]) -> T {
        quadratic_objective(&self.h_matrix, &self.h_vector, self.lambda, beta)
    }

    /// `(Ĥ + λI)β − ĥ`.
    pub fn gradient(&self, beta: &[T]) -> Vec<T> {
        quadratic_gradient(&self.h_matrix, &self.h_vector, self.lambda, beta)
    }

    /// Max-abs gradient entry at the fitted coefficients.
    pub fn stationarity_residual(&self) -> T {
        max_abs(&self.gradient(&self.beta))
    }
}

pub fn predict<T: Scalar>(fit: &LsifFit<T>, x: &[T]) -> Result<T> {
    fit.predict(x)
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&u, &v)| u * v).sum()
}

pub(crate) fn quadratic_objective<T: Scalar>(h_matrix: &SymMatrix<T>, h_vector: &[T], lambda: T, beta: &[T]) -> T {
    let hb = h_matrix.mul_vec(beta);
    let half = T::lit(0.5);
    half * dot(beta, &hb) - dot(beta, h_vector) + half * lambda * dot(beta, beta)
}

pub(crate) fn quadratic_gradient<T: Scalar>(h_matrix: &SymMatrix<T>, h_vector: &[T], lambda: T, beta: &[T]) -> Vec<T> {
    let hb = h_matrix.mul_vec(beta);
    hb.iter().zip(h_vector).zip(beta).map(|((&a, &h), &b)| a + lambda * b - h).collect()
}

/// `J(β)` evaluated directly from the samples, without forming `Ĥ`:
/// `(1/2N₀) Σ r_β(X_i)² − (1/N₁) Σ r_β(Z_j) + (λ/2)‖β‖²`.
pub fn sample_objective<T: Scalar, B: Basis<T> + ?Sized>(
    data: &TwoSampleData<T>,
    basis: &B,
    lambda: T,
    beta: &[T],
) -> Result<T> {
    let r = |x: &[T]| -> Result<T> { Ok(dot(beta, &basis.evaluate(x)?)) };
    let mut sq = T::zero();
    for x in data.denominator().rows() {
        let v = r(x)?;
        sq += v * v;
    }
    let mut lin = T::zero();
    for z in data.numerator().rows() {
        lin += r(z)?;
    }
    let half = T::lit(0.5);
    Ok(half * sq / T::count(data.n_denominator()) - lin / T::count(data.n_numerator())
        + half * lambda * dot(beta, beta))
}

/// `Φ_c(x) = 1(x ∈ A_M(c))` with `A_M` taken over the denominator sample.
pub fn indicator_basis<T: Scalar>(
    data: &TwoSampleData<T>,
    metric: &Metric<T>,
    m: usize,
    center: &[T],
) -> Result<IndicatorBasis<T>> {
    indicator_basis_with_region(data, metric, m, center, IndicatorRegion::Catchment)
}

pub fn indicator_basis_with_region<T: Scalar>(
    data: &TwoSampleData<T>,
    metric: &Metric<T>,
    m: usize,
    center: &[T],
    region: IndicatorRegion,
) -> Result<IndicatorBasis<T>> {
    let model = NeighborModel::new(data.denominator().clone(), metric.clone(), m)?;
    IndicatorBasis::new(Arc::new(model), center.to_vec(), region)
}

/// `K_M(c) = #{j : Z_j ∈ A_M(c)}` against a denominator model.
pub fn catchment_count<T: Scalar>(model: &NeighborModel<T>, numerator: &Points<T>, center: &[T]) -> Result<usize> {
    let mut count = 0;
    for z in numerator.rows() {
        if model.catchment_contains(center, z)? {
            count += 1;
        }
    }
    Ok(count)
}

/// `r̂_M(c) = (N₀/N₁) · K_M(c)/M`.
pub fn one_step_dre<T: Scalar>(data: &TwoSampleData<T>, metric: &Metric<T>, m: usize, center: &[T]) -> Result<T> {
    let model = NeighborModel::new(data.denominator().clone(), metric.clone(), m)?;
    let k = catchment_count(&model, data.numerator(), center)?;
    Ok(one_step_value(data.n_denominator(), data.n_numerator(), k, m))
}

/// `(N₀/N₁)·K/M`.
pub fn one_step_value<T: Scalar>(n_den: usize, n_num: usize, k: usize, m: usize) -> T {
    T::count(n_den) / T::count(n_num) * (T::count(k) / T::count(m))
}

/// LSIF with the indicator basis at `λ = 0` against the one-step estimator
/// at one center.
#[derive(Debug, Clone, PartialEq)]
pub struct OneStepCheck<T> {
    pub lsif_value: T,
    pub one_step_value: T,
    pub max_abs_gap: T,
    /// `N₀ · Ĥ`: denominator points in the indicator's support.
    pub support_count: usize,
    /// `K_M(c)`.
    pub matched_times: usize,
    pub h_matrix: T,
    pub h_vector: T,
}

pub fn check_one_step<T: Scalar>(
    data: &TwoSampleData<T>,
    metric: &Metric<T>,
    m: usize,
    center: &[T],
) -> Result<OneStepCheck<T>> {
    check_one_step_with_region(data, metric, m, center, IndicatorRegion::Catchment)
}

pub fn check_one_step_with_region<T: Scalar>(
    data: &TwoSampleData<T>,
    metric: &Metric<T>,
    m: usize,
    center: &[T],
    region: IndicatorRegion,
) -> Result<OneStepCheck<T>> {
    let basis = indicator_basis_with_region(data, metric, m, center, region)?;
    let model = basis.model().clone();
    let matched_times = catchment_count(&model, data.numerator(), center)?;
    let support_count = data.denominator().rows().try_fold(0usize, |acc, x| {
        basis.contains(x).map(|hit| acc + usize::from(hit))
    })?;
    let fitted = fit(data, Arc::new(basis), T::zero())?;
    let lsif_value = fitted.predict(center)?;
    let one_step_value = one_step_value(data.n_denominator(), data.n_numerator(), matched_times, m);
    Ok(OneStepCheck {
        lsif_value,
        one_step_value,
        max_abs_gap: (lsif_value - one_step_value).abs(),
        support_count,
        matched_times,
        h_matrix: fitted.h_matrix.get(0, 0),
        h_vector: fitted.h_vector[0],
    })
}
