use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Arm, ObservationalDataset};
use crate::error::{Error, Result};
use crate::points::Points;
use crate::scalar::Scalar;

/// Real-valued function of a covariate vector.
pub type SurfaceFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Data-generating process with known ground truth.
///
/// Covariates are uniform on the cube `[support.0, support.1]^dim`,
/// `D ~ Bernoulli(e₀(X))` and `Y(ω) = μ_ω(X) + noise_sd · N(0, 1)`.
#[derive(Clone)]
pub struct DgpSpec {
    pub name: String,
    pub dim: usize,
    pub support: (f64, f64),
    pub propensity: SurfaceFn,
    pub outcome_mean_treated: SurfaceFn,
    pub outcome_mean_control: SurfaceFn,
    pub noise_sd: f64,
    pub overlap_epsilon: f64,
    pub true_ate: f64,
}

impl fmt::Debug for DgpSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DgpSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("support", &self.support)
            .field("noise_sd", &self.noise_sd)
            .field("overlap_epsilon", &self.overlap_epsilon)
            .field("true_ate", &self.true_ate)
            .finish_non_exhaustive()
    }
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

impl DgpSpec {
    pub const LOGISTIC_EPSILON: f64 = 0.1;

    /// `X ~ U[−1,1]^d`, `e₀(x) = ε + (1 − 2ε)·sigmoid(2x₁)` with `ε = 0.1`,
    /// `μ₁(x) = 1 + x₁ + x₂`, `μ₀(x) = x₁`, unit Gaussian noise.
    ///
    /// `x₁, x₂` are columns `x0, x1`; `x₂` is dropped when `dim = 1`. The
    /// covariate law is symmetric, so `τ₀ = 1 + E[x₂] = 1`.
    pub fn logistic(dim: usize) -> Self {
        let eps = Self::LOGISTIC_EPSILON;
        Self {
            name: "logistic".into(),
            dim,
            support: (-1.0, 1.0),
            propensity: Arc::new(move |x| eps + (1.0 - 2.0 * eps) * sigmoid(2.0 * x[0])),
            outcome_mean_treated: Arc::new(|x| 1.0 + x[0] + x.get(1).copied().unwrap_or(0.0)),
            outcome_mean_control: Arc::new(|x| x[0]),
            noise_sd: 1.0,
            overlap_epsilon: eps,
            true_ate: 1.0,
        }
    }

    pub fn with_noise_sd(mut self, noise_sd: f64) -> Self {
        self.noise_sd = noise_sd;
        self
    }

    /// Looks up a built-in process by name.
    pub fn builtin(name: &str, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("DGP dimension must be positive".into()));
        }
        match name {
            "logistic" => Ok(Self::logistic(dim)),
            other => Err(Error::InvalidInput(format!("unknown DGP `{other}`"))),
        }
    }

    pub fn propensity_at(&self, x: &[f64]) -> f64 {
        (self.propensity)(x)
    }

    /// Oracle inverse-propensity weight `1/e₀(x)` for the treated arm and
    /// `1/(1 − e₀(x))` for the control arm.
    pub fn inverse_propensity(&self, arm: Arm, x: &[f64]) -> f64 {
        let e = self.propensity_at(x);
        match arm {
            Arm::Treated => 1.0 / e,
            Arm::Control => 1.0 / (1.0 - e),
        }
    }

    fn draw_covariates<R: Rng>(&self, rng: &mut R, out: &mut Vec<f64>) {
        let (lo, hi) = self.support;
        for _ in 0..self.dim {
            out.push(rng.random_range(lo..hi));
        }
    }
}

/// A generated dataset together with its per-unit ground truth.
#[derive(Debug, Clone)]
pub struct SimulatedSample<T> {
    pub dataset: ObservationalDataset<T>,
    pub propensity: Vec<f64>,
    pub mu_treated: Vec<f64>,
    pub mu_control: Vec<f64>,
    /// Potential outcomes `Y_i(1)` and `Y_i(0)`.
    pub y_treated: Vec<f64>,
    pub y_control: Vec<f64>,
}

pub fn generate<T: Scalar>(spec: &DgpSpec, n: usize, seed: u64) -> Result<ObservationalDataset<T>> {
    generate_with_truth(spec, n, seed).map(|s| s.dataset)
}

/// Draws `n` units. Reproducible given `seed`; an empty arm is an error
/// rather than a redraw.
pub fn generate_with_truth<T: Scalar>(spec: &DgpSpec, n: usize, seed: u64) -> Result<SimulatedSample<T>> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 units, got {n}")));
    }
    if spec.dim == 0 {
        return Err(Error::InvalidInput("DGP dimension must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n * spec.dim);
    let mut treatment = Vec::with_capacity(n);
    let mut outcome = Vec::with_capacity(n);
    let mut propensity = Vec::with_capacity(n);
    let mut mu_treated = Vec::with_capacity(n);
    let mut mu_control = Vec::with_capacity(n);
    let mut y_treated = Vec::with_capacity(n);
    let mut y_control = Vec::with_capacity(n);
    let mut row = Vec::with_capacity(spec.dim);

    for _ in 0..n {
        row.clear();
        spec.draw_covariates(&mut rng, &mut row);
        let e = (spec.propensity)(&row);
        let arm = Arm::from_flag(rng.random::<f64>() < e);
        let m1 = (spec.outcome_mean_treated)(&row);
        let m0 = (spec.outcome_mean_control)(&row);
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z0: f64 = StandardNormal.sample(&mut rng);
        let y1 = m1 + spec.noise_sd * z1;
        let y0 = m0 + spec.noise_sd * z0;
        let y = match arm {
            Arm::Treated => y1,
            Arm::Control => y0,
        };
        x.extend(row.iter().map(|&v| T::lit(v)));
        treatment.push(arm);
        outcome.push(T::lit(y));
        propensity.push(e);
        mu_treated.push(m1);
        mu_control.push(m0);
        y_treated.push(y1);
        y_control.push(y0);
    }

    let dataset = ObservationalDataset::new(Points::new(x, spec.dim)?, treatment, outcome)?;
    Ok(SimulatedSample { dataset, propensity, mu_treated, mu_control, y_treated, y_control })
}
