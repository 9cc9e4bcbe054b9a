//! ATE estimators built on M-NN matching with replacement, and the per-arm
//! polynomial outcome regression used for bias correction.

use crate::dataset::{Arm, ObservationalDataset};
use crate::error::{Error, Result};
use crate::linalg::{solve_spd, SymMatrix};
use crate::lsif::{Basis, PolynomialBasis};
use crate::neighbors::{matching_structures, MatchingStructures, Metric};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AteVariant {
    Matching,
    WeightForm,
    RegressionPlugin,
    BiasCorrected,
    DrRiesz,
}

impl AteVariant {
    pub fn name(self) -> &'static str {
        match self {
            AteVariant::Matching => "matching",
            AteVariant::WeightForm => "weight",
            AteVariant::RegressionPlugin => "reg",
            AteVariant::BiasCorrected => "bc",
            AteVariant::DrRiesz => "dr",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AteDiagnostics<T> {
    /// `None` for the regression plug-in.
    pub m: Option<usize>,
    pub max_weight: Option<T>,
    pub n_treated: usize,
    pub n_control: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AteEstimate<T> {
    pub tau: T,
    pub variant: AteVariant,
    pub diagnostics: AteDiagnostics<T>,
}

fn diagnostics<T: Scalar>(dataset: &ObservationalDataset<T>, s: Option<&MatchingStructures>) -> AteDiagnostics<T> {
    AteDiagnostics {
        m: s.map(|s| s.m),
        max_weight: s.map(|s| (0..s.counts.len()).map(|i| s.weight::<T>(i)).fold(T::zero(), T::max)),
        n_treated: dataset.n_treated(),
        n_control: dataset.n_control(),
    }
}

fn check_structures<T: Scalar>(dataset: &ObservationalDataset<T>, s: &MatchingStructures) -> Result<()> {
    if s.counts.len() != dataset.len() {
        return Err(Error::DimensionMismatch { expected: dataset.len(), found: s.counts.len() });
    }
    Ok(())
}

/// `(Ŷ_i(0), Ŷ_i(1))`: the observed arm keeps `Y_i`, the other is the mean
/// outcome over `J_M(i)`.
pub fn impute<T: Scalar>(dataset: &ObservationalDataset<T>, metric: &Metric<T>, m: usize) -> Result<Vec<(T, T)>> {
    let s = matching_structures(dataset, metric, m)?;
    impute_with(dataset, &s)
}

pub fn impute_with<T: Scalar>(dataset: &ObservationalDataset<T>, s: &MatchingStructures) -> Result<Vec<(T, T)>> {
    check_structures(dataset, s)?;
    let mm = T::count(s.m);
    Ok((0..dataset.len())
        .map(|i| {
            let matched = s.neighbors[i].iter().map(|&j| dataset.y(j)).sum::<T>() / mm;
            match dataset.arm(i) {
                Arm::Treated => (matched, dataset.y(i)),
                Arm::Control => (dataset.y(i), matched),
            }
        })
        .collect())
}

/// `τ̂_M = (1/n) Σ (Ŷ_i(1) − Ŷ_i(0))`.
pub fn ate_matching<T: Scalar>(dataset: &ObservationalDataset<T>, metric: &Metric<T>, m: usize) -> Result<AteEstimate<T>> {
    let s = matching_structures(dataset, metric, m)?;
    ate_matching_with(dataset, &s)
}

pub fn ate_matching_with<T: Scalar>(dataset: &ObservationalDataset<T>, s: &MatchingStructures) -> Result<AteEstimate<T>> {
    let pairs = impute_with(dataset, s)?;
    let tau = pairs.iter().map(|&(y0, y1)| y1 - y0).sum::<T>() / T::count(dataset.len());
    Ok(AteEstimate { tau, variant: AteVariant::Matching, diagnostics: diagnostics(dataset, Some(s)) })
}

/// `τ̂_M = (1/n) Σ (2D_i − 1)(1 + K_M(i)/M) Y_i`.
pub fn ate_weight_form<T: Scalar>(dataset: &ObservationalDataset<T>, metric: &Metric<T>, m: usize) -> Result<AteEstimate<T>> {
    let s = matching_structures(dataset, metric, m)?;
    ate_weight_form_with(dataset, &s)
}

pub fn ate_weight_form_with<T: Scalar>(dataset: &ObservationalDataset<T>, s: &MatchingStructures) -> Result<AteEstimate<T>> {
    check_structures(dataset, s)?;
    let tau = (0..dataset.len())
        .map(|i| dataset.arm(i).sign::<T>() * s.weight::<T>(i) * dataset.y(i))
        .sum::<T>()
        / T::count(dataset.len());
    Ok(AteEstimate { tau, variant: AteVariant::WeightForm, diagnostics: diagnostics(dataset, Some(s)) })
}

/// Per-arm least-squares polynomial regressions `μ̂₁`, `μ̂₀`.
#[derive(Debug, Clone)]
pub struct OutcomeModel<T> {
    pub degree: u32,
    basis: PolynomialBasis,
    treated: ArmRegression<T>,
    control: ArmRegression<T>,
}

/// `μ̂(x) = offset + coefᵀΦ(x)`; the offset is the arm's first outcome, so a
/// constant arm is reproduced exactly.
#[derive(Debug, Clone)]
struct ArmRegression<T> {
    offset: T,
    coef: Vec<T>,
}

impl<T: Scalar> OutcomeModel<T> {
    pub fn predict(&self, arm: Arm, x: &[T]) -> Result<T> {
        let phi = self.basis.evaluate(x)?;
        let reg = match arm {
            Arm::Treated => &self.treated,
            Arm::Control => &self.control,
        };
        Ok(reg.offset + reg.coef.iter().zip(&phi).map(|(&c, &p)| c * p).sum::<T>())
    }

    pub fn coefficients(&self, arm: Arm) -> (T, &[T]) {
        let reg = match arm {
            Arm::Treated => &self.treated,
            Arm::Control => &self.control,
        };
        (reg.offset, &reg.coef)
    }

    /// `R̂_i = Y_i − μ̂_{D_i}(X_i)`.
    pub fn residuals(&self, dataset: &ObservationalDataset<T>) -> Result<Vec<T>> {
        (0..dataset.len())
            .map(|i| Ok(dataset.y(i) - self.predict(dataset.arm(i), dataset.x(i))?))
            .collect()
    }

    /// Max-abs entry of `Φᵀ R̂` per arm, the normal-equation residual.
    pub fn normal_equation_residual(&self, dataset: &ObservationalDataset<T>) -> Result<T> {
        let r = self.residuals(dataset)?;
        let b = Basis::<T>::size(&self.basis);
        let mut worst = T::zero();
        for arm in [Arm::Treated, Arm::Control] {
            let mut acc = vec![T::zero(); b];
            for &i in dataset.arm_indices(arm) {
                let phi = self.basis.evaluate(dataset.x(i))?;
                for (a, p) in acc.iter_mut().zip(phi) {
                    *a += p * r[i];
                }
            }
            worst = acc.into_iter().fold(worst, |w, v| w.max(v.abs()));
        }
        Ok(worst)
    }
}

pub fn fit_outcome<T: Scalar>(dataset: &ObservationalDataset<T>, degree: u32) -> Result<OutcomeModel<T>> {
    let basis = PolynomialBasis::new(dataset.dim(), degree)?;
    let treated = fit_arm_regression(dataset, Arm::Treated, &basis)?;
    let control = fit_arm_regression(dataset, Arm::Control, &basis)?;
    Ok(OutcomeModel { degree, basis, treated, control })
}

fn fit_arm_regression<T: Scalar>(
    dataset: &ObservationalDataset<T>,
    arm: Arm,
    basis: &PolynomialBasis,
) -> Result<ArmRegression<T>> {
    let idx = dataset.arm_indices(arm);
    let b = Basis::<T>::size(basis);
    if idx.len() <= b {
        return Err(Error::InvalidInput(format!(
            "rank-deficient design: {:?} arm has {} units for {b} coefficients",
            arm,
            idx.len()
        )));
    }
    let offset = dataset.y(idx[0]);
    let mut gram = SymMatrix::zeros(b);
    let mut rhs = vec![T::zero(); b];
    for &i in idx {
        let phi = basis.evaluate(dataset.x(i))?;
        gram.add_outer(&phi, T::one());
        let y = dataset.y(i) - offset;
        for (r, p) in rhs.iter_mut().zip(&phi) {
            *r += *p * y;
        }
    }
    let coef = solve_spd(&gram, &rhs).map_err(|e| match e {
        Error::Singular { .. } => Error::InvalidInput(format!("rank-deficient design in {arm:?} arm")),
        other => other,
    })?;
    Ok(ArmRegression { offset, coef })
}

/// `τ̂_reg = (1/n) Σ (μ̂₁(X_i) − μ̂₀(X_i))`.
pub fn ate_regression_plugin<T: Scalar>(dataset: &ObservationalDataset<T>, outcome: &OutcomeModel<T>) -> Result<AteEstimate<T>> {
    let tau = regression_contrasts(dataset, outcome)?.into_iter().sum::<T>() / T::count(dataset.len());
    Ok(AteEstimate { tau, variant: AteVariant::RegressionPlugin, diagnostics: diagnostics(dataset, None) })
}

fn regression_contrasts<T: Scalar>(dataset: &ObservationalDataset<T>, outcome: &OutcomeModel<T>) -> Result<Vec<T>> {
    (0..dataset.len())
        .map(|i| Ok(outcome.predict(Arm::Treated, dataset.x(i))? - outcome.predict(Arm::Control, dataset.x(i))?))
        .collect()
}

/// `τ̂_bc = τ̂_reg + (1/n)[Σ_{D=1} (1 + K/M) R̂ − Σ_{D=0} (1 + K/M) R̂]`.
pub fn ate_bias_corrected<T: Scalar>(
    dataset: &ObservationalDataset<T>,
    metric: &Metric<T>,
    m: usize,
    outcome: &OutcomeModel<T>,
) -> Result<AteEstimate<T>> {
    let s = matching_structures(dataset, metric, m)?;
    ate_bias_corrected_with(dataset, &s, outcome)
}

pub fn ate_bias_corrected_with<T: Scalar>(
    dataset: &ObservationalDataset<T>,
    s: &MatchingStructures,
    outcome: &OutcomeModel<T>,
) -> Result<AteEstimate<T>> {
    check_structures(dataset, s)?;
    let reg = ate_regression_plugin(dataset, outcome)?.tau;
    let r = outcome.residuals(dataset)?;
    let mut treated = T::zero();
    let mut control = T::zero();
    for (i, &ri) in r.iter().enumerate() {
        let term = s.weight::<T>(i) * ri;
        match dataset.arm(i) {
            Arm::Treated => treated += term,
            Arm::Control => control += term,
        }
    }
    let tau = reg + (treated - control) / T::count(dataset.len());
    Ok(AteEstimate { tau, variant: AteVariant::BiasCorrected, diagnostics: diagnostics(dataset, Some(s)) })
}

/// Per-unit `μ̂₁(X_i) − μ̂₀(X_i) + α̂(Z_i)(Y_i − μ̂_{D_i}(X_i))` with the
/// nearest-neighbor representer `α̂(Z_i) = (2D_i − 1)(1 + K_M(i)/M)`.
pub fn dr_riesz_terms<T: Scalar>(
    dataset: &ObservationalDataset<T>,
    s: &MatchingStructures,
    outcome: &OutcomeModel<T>,
) -> Result<Vec<T>> {
    check_structures(dataset, s)?;
    let contrasts = regression_contrasts(dataset, outcome)?;
    let r = outcome.residuals(dataset)?;
    Ok((0..dataset.len())
        .map(|i| contrasts[i] + dataset.arm(i).sign::<T>() * s.weight::<T>(i) * r[i])
        .collect())
}

/// `τ̂ = mean of [μ̂₁ − μ̂₀ + α̂ (Y − μ̂_D)]`, the root of the orthogonal score.
pub fn ate_dr_riesz<T: Scalar>(
    dataset: &ObservationalDataset<T>,
    metric: &Metric<T>,
    m: usize,
    outcome: &OutcomeModel<T>,
) -> Result<AteEstimate<T>> {
    let s = matching_structures(dataset, metric, m)?;
    ate_dr_riesz_with(dataset, &s, outcome)
}

pub fn ate_dr_riesz_with<T: Scalar>(
    dataset: &ObservationalDataset<T>,
    s: &MatchingStructures,
    outcome: &OutcomeModel<T>,
) -> Result<AteEstimate<T>> {
    let terms = dr_riesz_terms(dataset, s, outcome)?;
    let tau = terms.into_iter().sum::<T>() / T::count(dataset.len());
    Ok(AteEstimate { tau, variant: AteVariant::DrRiesz, diagnostics: diagnostics(dataset, Some(s)) })
}

/// `⌈2 n^{1/3}⌉`.
pub fn default_match_count(n: usize) -> usize {
    (2.0 * (n as f64).cbrt()).ceil() as usize
}
