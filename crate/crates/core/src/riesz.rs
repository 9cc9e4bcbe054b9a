//! Riesz regression for the ATE functional.
//!
//! The inverse propensity weights `w₀(1,x) = 1/e₀(x)` and
//! `w₀(0,x) = 1/(1 − e₀(x))` are density ratios and are fitted arm by arm with
//! the LSIF closed form
//!
//! ```text
//! Ĥ_ω = (1/n) Σ 1(D_i = ω) Φ(X_i)Φ(X_i)ᵀ,   ĥ_ω = (1/n) Σ Φ(X_i),   θ̂_ω = (Ĥ_ω + λI)⁻¹ ĥ_ω.
//! ```
//!
//! The joint Riesz risk `E[α(Z)² − 2(α(1,X) − α(0,X))]` with
//! `α(Z) = 1(D=1)w(1,X) − 1(D=0)w(0,X)` is solved as one stacked system and
//! separates into the two arm-wise problems.

use std::sync::Arc;

use rayon::prelude::*;

use crate::dataset::{Arm, ObservationalDataset};
use crate::error::{Error, Result};
use crate::linalg::{max_abs, solve_spd, SymMatrix};
use crate::lsif::{
    accumulate_outer, check_basis_dim, check_lambda, dot, quadratic_gradient, quadratic_objective, Basis,
    IndicatorBasis, IndicatorRegion,
};
use crate::neighbors::{matching_structures_with, ArmModels, Metric};
use crate::scalar::Scalar;

/// Fitted weight function `w(ω, ·) = θᵀΦ(·)` for one arm.
#[derive(Debug, Clone)]
pub struct ArmWeightFit<T> {
    pub arm: Arm,
    pub basis: Arc<dyn Basis<T>>,
    pub lambda: T,
    pub h_matrix: SymMatrix<T>,
    pub h_vector: Vec<T>,
    pub theta: Vec<T>,
}

impl<T: Scalar> ArmWeightFit<T> {
    pub fn weight(&self, x: &[T]) -> Result<T> {
        Ok(dot(&self.theta, &self.basis.evaluate(x)?))
    }

    /// `½θᵀĤθ − θᵀĥ + (λ/2)‖θ‖²`.
    pub fn objective(&self, theta: &[T]) -> T {
        quadratic_objective(&self.h_matrix, &self.h_vector, self.lambda, theta)
    }

    pub fn gradient(&self, theta: &[T]) -> Vec<T> {
        quadratic_gradient(&self.h_matrix, &self.h_vector, self.lambda, theta)
    }

    pub fn stationarity_residual(&self) -> T {
        max_abs(&self.gradient(&self.theta))
    }
}

/// Arm-wise moments `(Ĥ_ω, ĥ_ω)`.
pub fn arm_moments<T: Scalar, B: Basis<T> + ?Sized>(
    dataset: &ObservationalDataset<T>,
    arm: Arm,
    basis: &B,
) -> Result<(SymMatrix<T>, Vec<T>)> {
    check_basis_dim(basis, dataset.dim())?;
    let rows = (0..dataset.len()).map(|i| (dataset.arm(i) == arm, dataset.x(i)));
    accumulate_outer(basis, rows, dataset.len())
}

pub fn fit_weight_arm<T: Scalar>(
    dataset: &ObservationalDataset<T>,
    arm: Arm,
    basis: Arc<dyn Basis<T>>,
    lambda: T,
) -> Result<ArmWeightFit<T>> {
    check_lambda(lambda)?;
    let (h_matrix, h_vector) = arm_moments(dataset, arm, basis.as_ref())?;
    let theta = solve_spd(&h_matrix.shifted(lambda), &h_vector)?;
    Ok(ArmWeightFit { arm, basis, lambda, h_matrix, h_vector, theta })
}

/// Empirical arm objective straight from the sample:
/// `(1/2n) Σ 1(D_i = ω) w(X_i)² − (1/n) Σ w(X_i) + (λ/2)‖θ‖²`.
pub fn arm_sample_objective<T: Scalar, B: Basis<T> + ?Sized>(
    dataset: &ObservationalDataset<T>,
    arm: Arm,
    basis: &B,
    lambda: T,
    theta: &[T],
) -> Result<T> {
    let mut sq = T::zero();
    let mut lin = T::zero();
    for i in 0..dataset.len() {
        let w = dot(theta, &basis.evaluate(dataset.x(i))?);
        if dataset.arm(i) == arm {
            sq += w * w;
        }
        lin += w;
    }
    let n = T::count(dataset.len());
    let half = T::lit(0.5);
    Ok(half * sq / n - lin / n + half * lambda * dot(theta, theta))
}

/// `1 + K_M(i)/M` for every unit.
pub fn nn_weights<T: Scalar>(dataset: &ObservationalDataset<T>, metric: &Metric<T>, m: usize) -> Result<Vec<T>> {
    let models = ArmModels::new(dataset, metric, m)?;
    let s = matching_structures_with(dataset, &models)?;
    Ok((0..dataset.len()).map(|i| s.weight(i)).collect())
}

/// `ŵ(D_i, X_i) = 1 + K_M(i)/M`.
pub fn nn_weight<T: Scalar>(dataset: &ObservationalDataset<T>, metric: &Metric<T>, m: usize, i: usize) -> Result<T> {
    if i >= dataset.len() {
        return Err(Error::InvalidInput(format!("unit {i} out of range")));
    }
    Ok(nn_weights(dataset, metric, m)?[i])
}

/// Catchment indicator `Φ_{X_i}` over the reference arm of unit `i`.
pub fn unit_indicator_basis<T: Scalar>(
    dataset: &ObservationalDataset<T>,
    models: &ArmModels<T>,
    i: usize,
) -> Result<IndicatorBasis<T>> {
    let arm = dataset.arm(i);
    IndicatorBasis::new(models.get(arm).clone(), dataset.x(i).to_vec(), IndicatorRegion::Catchment)
}

/// LSIF fit of `w(D_i, ·)` with the unit's own indicator basis; the fitted
/// weight at the unit is the returned fit's `theta[0]`.
pub fn indicator_weight_fit<T: Scalar>(
    dataset: &ObservationalDataset<T>,
    models: &ArmModels<T>,
    i: usize,
    lambda: T,
) -> Result<ArmWeightFit<T>> {
    let basis = unit_indicator_basis(dataset, models, i)?;
    fit_weight_arm(dataset, dataset.arm(i), Arc::new(basis), lambda)
}

/// Per-unit indicator LSIF weights `ŵ(D_i, X_i)` at `λ = 0`.
pub fn indicator_weights<T: Scalar>(dataset: &ObservationalDataset<T>, metric: &Metric<T>, m: usize) -> Result<Vec<T>> {
    let models = ArmModels::new(dataset, metric, m)?;
    (0..dataset.len())
        .into_par_iter()
        .map(|i| {
            let f = indicator_weight_fit(dataset, &models, i, T::zero())?;
            f.weight(dataset.x(i))
        })
        .collect()
}

/// Per-arm weight functions.
#[derive(Debug, Clone)]
pub struct WeightModel<T> {
    pub treated: ArmWeightFit<T>,
    pub control: ArmWeightFit<T>,
}

impl<T: Scalar> WeightModel<T> {
    pub fn arm(&self, arm: Arm) -> &ArmWeightFit<T> {
        match arm {
            Arm::Treated => &self.treated,
            Arm::Control => &self.control,
        }
    }
}

/// `α(Z) = 1(D=1) w(1,X) − 1(D=0) w(0,X)`.
#[derive(Debug, Clone)]
pub struct RieszRepresenter<T> {
    pub weight_model: WeightModel<T>,
}

/// Bases for the treated and control weight functions.
#[derive(Debug, Clone)]
pub struct ArmBases<T> {
    pub treated: Arc<dyn Basis<T>>,
    pub control: Arc<dyn Basis<T>>,
}

impl<T: Scalar> ArmBases<T> {
    pub fn shared(basis: Arc<dyn Basis<T>>) -> Self {
        Self { treated: basis.clone(), control: basis }
    }
}

/// Moments of the joint Riesz problem in the stacked parameter `(θ₁, θ₀)`.
///
/// With representer features `g(Z) = (D Φ₁(X), −(1−D) Φ₀(X))` we have
/// `α = θᵀg`, and `m(W, α) = α(1,X) − α(0,X) = θᵀ(Φ₁(X), Φ₀(X))`, so
/// `Ĥ = (1/n) Σ g gᵀ` and `ĥ = (1/n) Σ (Φ₁, Φ₀)`.
pub fn joint_moments<T: Scalar>(dataset: &ObservationalDataset<T>, bases: &ArmBases<T>) -> Result<(SymMatrix<T>, Vec<T>)> {
    check_basis_dim(bases.treated.as_ref(), dataset.dim())?;
    check_basis_dim(bases.control.as_ref(), dataset.dim())?;
    let b1 = bases.treated.size();
    let b0 = bases.control.size();
    let b = b1 + b0;
    let mut outer = SymMatrix::zeros(b);
    let mut lin = vec![T::zero(); b];
    let mut g = vec![T::zero(); b];
    let mut phi1 = vec![T::zero(); b1];
    let mut phi0 = vec![T::zero(); b0];
    for i in 0..dataset.len() {
        let x = dataset.x(i);
        bases.treated.evaluate_into(x, &mut phi1)?;
        bases.control.evaluate_into(x, &mut phi0)?;
        if phi1.iter().chain(&phi0).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteBasis);
        }
        let d = match dataset.arm(i) {
            Arm::Treated => T::one(),
            Arm::Control => T::zero(),
        };
        for k in 0..b1 {
            g[k] = d * phi1[k];
        }
        for k in 0..b0 {
            g[b1 + k] = -((T::one() - d) * phi0[k]);
        }
        outer.add_outer(&g, T::one());
        for (s, &v) in lin.iter_mut().zip(phi1.iter().chain(&phi0)) {
            *s += v;
        }
    }
    let n = T::count(dataset.len());
    let data = outer.as_slice().iter().map(|&v| v / n).collect();
    Ok((SymMatrix::from_row_major(b, data)?, lin.into_iter().map(|v| v / n).collect()))
}

/// Solves the joint Riesz problem in one stacked system.
pub fn riesz_fit<T: Scalar>(dataset: &ObservationalDataset<T>, bases: &ArmBases<T>, lambda: T) -> Result<RieszRepresenter<T>> {
    check_lambda(lambda)?;
    let (h_matrix, h_vector) = joint_moments(dataset, bases)?;
    let theta = solve_spd(&h_matrix.shifted(lambda), &h_vector)?;
    let b1 = bases.treated.size();
    let block = |arm: Arm, range: std::ops::Range<usize>, basis: &Arc<dyn Basis<T>>| -> Result<ArmWeightFit<T>> {
        let len = range.len();
        let mut hm = SymMatrix::zeros(len);
        for (a, i) in range.clone().enumerate() {
            for (b, j) in range.clone().enumerate() {
                hm.set(a, b, h_matrix.get(i, j));
            }
        }
        Ok(ArmWeightFit {
            arm,
            basis: basis.clone(),
            lambda,
            h_matrix: hm,
            h_vector: h_vector[range.clone()].to_vec(),
            theta: theta[range].to_vec(),
        })
    };
    let treated = block(Arm::Treated, 0..b1, &bases.treated)?;
    let control = block(Arm::Control, b1..h_vector.len(), &bases.control)?;
    Ok(RieszRepresenter { weight_model: WeightModel { treated, control } })
}

/// Joint empirical Riesz risk straight from the sample,
/// `(1/n) Σ [α(Z_i)² − 2(w(1,X_i) + w(0,X_i))] + λ(‖θ₁‖² + ‖θ₀‖²)`.
pub fn riesz_sample_objective<T: Scalar>(
    dataset: &ObservationalDataset<T>,
    bases: &ArmBases<T>,
    lambda: T,
    theta_treated: &[T],
    theta_control: &[T],
) -> Result<T> {
    let mut total = T::zero();
    let two = T::lit(2.0);
    for i in 0..dataset.len() {
        let x = dataset.x(i);
        let w1 = dot(theta_treated, &bases.treated.evaluate(x)?);
        let w0 = dot(theta_control, &bases.control.evaluate(x)?);
        let alpha = match dataset.arm(i) {
            Arm::Treated => w1,
            Arm::Control => -w0,
        };
        total += alpha * alpha - two * (w1 + w0);
    }
    Ok(total / T::count(dataset.len()) + lambda * (dot(theta_treated, theta_treated) + dot(theta_control, theta_control)))
}

impl<T: Scalar> RieszRepresenter<T> {
    /// Gradient of [`riesz_sample_objective`]: `2[(Ĥ_ω + λI)θ_ω − ĥ_ω]` per arm.
    pub fn gradient(&self, theta_treated: &[T], theta_control: &[T]) -> Vec<T> {
        let two = T::lit(2.0);
        let mut g: Vec<T> = self.weight_model.treated.gradient(theta_treated);
        g.extend(self.weight_model.control.gradient(theta_control));
        g.into_iter().map(|v| two * v).collect()
    }

    pub fn stationarity_residual(&self) -> T {
        max_abs(&self.gradient(&self.weight_model.treated.theta, &self.weight_model.control.theta))
    }

    pub fn evaluate(&self, arm: Arm, x: &[T]) -> Result<T> {
        Ok(arm.sign::<T>() * self.weight_model.arm(arm).weight(x)?)
    }
}

/// `α̂(d, x)`.
pub fn evaluate_representer<T: Scalar>(rep: &RieszRepresenter<T>, arm: Arm, x: &[T]) -> Result<T> {
    rep.evaluate(arm, x)
}

/// Nearest-neighbor representer `α̂(Z_i) = (2D_i − 1)(1 + K_M(i)/M)` at every unit.
pub fn nn_representer<T: Scalar>(dataset: &ObservationalDataset<T>, metric: &Metric<T>, m: usize) -> Result<Vec<T>> {
    let w = nn_weights(dataset, metric, m)?;
    Ok(w.into_iter().enumerate().map(|(i, w)| dataset.arm(i).sign::<T>() * w).collect())
}

/// Orthogonal score `ψ = m − τ + α (y − γ)`.
pub fn dr_score<T: Scalar>(m_value: T, gamma_value: T, alpha_value: T, y: T, tau: T) -> Result<T> {
    if ![m_value, gamma_value, alpha_value, y, tau].iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("score inputs must be finite".into()));
    }
    Ok(m_value - tau + alpha_value * (y - gamma_value))
}
