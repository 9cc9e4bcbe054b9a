//! Randomized equivalence suites: LSIF vs the one-step density-ratio
//! estimator, matching vs its weight form, indicator LSIF weights vs
//! `1 + K/M`, joint vs arm-wise Riesz fits, and the DR algebra.
//!
//! Every instance draws from its own seed, derived up front from the base
//! seed, so results do not depend on scheduling.

use std::cmp::Ordering;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::dataset::{Arm, ObservationalDataset, TwoSampleData};
use crate::error::Result;
use crate::lsif::{
    catchment_count, fit, one_step_value, Basis, ConstantBasis, GaussianBasis, IndicatorBasis, IndicatorRegion,
    PolynomialBasis,
};
use crate::matching::{ate_bias_corrected_with, ate_dr_riesz_with, ate_matching_with, ate_weight_form_with, fit_outcome};
use crate::neighbors::{matching_structures_with, ArmModels, MatchingStructures, Metric, NeighborModel};
use crate::points::Points;
use crate::riesz::{dr_score, fit_weight_arm, indicator_weight_fit, riesz_fit, ArmBases};
use crate::sim::{replication_seeds, with_jobs};

/// Tolerance of every exact-equivalence check.
pub const EXACT_TOL: f64 = 1e-12;

pub const MAX_SAMPLE: usize = 300;
pub const MAX_DIM: usize = 3;
pub const MAX_M: usize = 5;

/// Deliberate defects for negative-control runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Matched-times counts come from a matching that breaks distance ties
    /// by descending index, on lattice data full of ties.
    ReversedTieBreak,
}

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub instances: usize,
    pub seed: u64,
    pub metric: Metric<f64>,
    pub fault: Option<Fault>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    LsifOneStep,
    WeightForm,
    IndicatorWeights,
    Separability,
    DrAlgebra,
}

impl Suite {
    pub const ALL: [Suite; 5] =
        [Suite::LsifOneStep, Suite::WeightForm, Suite::IndicatorWeights, Suite::Separability, Suite::DrAlgebra];

    pub fn name(self) -> &'static str {
        match self {
            Suite::LsifOneStep => "lsif_one_step",
            Suite::WeightForm => "matching_weight_form",
            Suite::IndicatorWeights => "lsif_nn_weight",
            Suite::Separability => "riesz_separability",
            Suite::DrAlgebra => "dr_bias_corrected",
        }
    }

    fn offset(self) -> u64 {
        match self {
            Suite::LsifOneStep => 1,
            Suite::WeightForm => 2,
            Suite::IndicatorWeights => 3,
            Suite::Separability => 4,
            Suite::DrAlgebra => 5,
        }
    }
}

/// One checked instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRecord {
    pub suite: Suite,
    pub index: usize,
    pub seed: u64,
    pub dim: usize,
    pub m: usize,
    /// `(N₀, N₁)` for two-sample suites, `(n₁, n₀)` for observational ones.
    pub sizes: (usize, usize),
    pub checks: usize,
    /// Checks with gap `≤ EXACT_TOL`.
    pub exact: usize,
    pub max_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteSummary {
    pub suite: Suite,
    pub instances: usize,
    pub checks: usize,
    pub exact: usize,
    pub max_gap: f64,
    pub failing_instances: usize,
}

impl SuiteSummary {
    pub fn passed(&self) -> bool {
        self.max_gap <= EXACT_TOL
    }
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub summaries: Vec<SuiteSummary>,
    pub records: Vec<InstanceRecord>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.summaries.iter().all(SuiteSummary::passed)
    }

    pub fn summary(&self, suite: Suite) -> Option<&SuiteSummary> {
        self.summaries.iter().find(|s| s.suite == suite)
    }
}

pub fn suite_seeds(base: u64, suite: Suite, instances: usize) -> Vec<u64> {
    replication_seeds(base.wrapping_mul(31).wrapping_add(suite.offset()), instances)
}

pub fn run_suite(cfg: &VerifyConfig, suite: Suite) -> Result<Vec<InstanceRecord>> {
    suite_seeds(cfg.seed, suite, cfg.instances)
        .par_iter()
        .enumerate()
        .map(|(index, &seed)| match suite {
            Suite::LsifOneStep => lsif_one_step_instance(index, seed, &cfg.metric),
            Suite::WeightForm => weight_form_instance(index, seed, &cfg.metric, cfg.fault),
            Suite::IndicatorWeights => indicator_weight_instance(index, seed, &cfg.metric),
            Suite::Separability => separability_instance(index, seed),
            Suite::DrAlgebra => dr_instance(index, seed, &cfg.metric),
        })
        .collect()
}

pub fn summarize(suite: Suite, records: &[InstanceRecord]) -> SuiteSummary {
    SuiteSummary {
        suite,
        instances: records.len(),
        checks: records.iter().map(|r| r.checks).sum(),
        exact: records.iter().map(|r| r.exact).sum(),
        max_gap: records.iter().map(|r| r.max_gap).fold(0.0, f64::max),
        failing_instances: records.iter().filter(|r| r.max_gap > EXACT_TOL).count(),
    }
}

pub fn run_verify(cfg: &VerifyConfig, jobs: usize) -> Result<VerifyReport> {
    with_jobs(jobs, || {
        let mut summaries = Vec::new();
        let mut records = Vec::new();
        for suite in Suite::ALL {
            let recs = run_suite(cfg, suite)?;
            summaries.push(summarize(suite, &recs));
            records.extend(recs);
        }
        Ok(VerifyReport { summaries, records })
    })?
}

/// Uniform points on `[0,1]^dim`; distinct with probability one.
pub fn uniform_points<R: Rng>(rng: &mut R, n: usize, dim: usize) -> Points<f64> {
    let data = (0..n * dim).map(|_| rng.random::<f64>()).collect();
    Points::new(data, dim).expect("finite points")
}

/// Random two-sample instance: `d ≤ 3`, `M ≤ 5`, `M ≤ N₀ ≤ 300`, `N₁ ≤ 300`.
pub fn random_two_sample<R: Rng>(rng: &mut R) -> (TwoSampleData<f64>, usize) {
    let dim = rng.random_range(1..=MAX_DIM);
    let m = rng.random_range(1..=MAX_M);
    let n0 = rng.random_range(m.max(2)..=MAX_SAMPLE);
    let n1 = rng.random_range(1..=MAX_SAMPLE);
    let den = uniform_points(rng, n0, dim);
    // numerator tilted towards the origin so the ratio is not constant
    let num_raw: Vec<f64> = (0..n1 * dim).map(|_| rng.random::<f64>().powf(1.5)).collect();
    let num = Points::new(num_raw, dim).expect("finite points");
    (TwoSampleData::new(den, num).expect("valid two-sample data"), m)
}

/// Random observational instance with both arms of size at least `min_arm`.
pub fn random_observational<R: Rng>(rng: &mut R, min_arm: usize) -> (ObservationalDataset<f64>, usize) {
    let dim = rng.random_range(1..=MAX_DIM);
    let m = rng.random_range(1..=MAX_M);
    let floor = m.max(min_arm);
    let n = rng.random_range((2 * floor).max(4)..=MAX_SAMPLE.max(2 * floor));
    loop {
        let x = uniform_points(rng, n, dim);
        let flags: Vec<u8> = x
            .rows()
            .map(|row| {
                let e = 0.2 + 0.6 * row[0];
                u8::from(rng.random::<f64>() < e)
            })
            .collect();
        let treated = flags.iter().filter(|&&f| f == 1).count();
        if treated < floor || n - treated < floor {
            continue;
        }
        let y: Vec<f64> = x
            .rows()
            .zip(&flags)
            .map(|(row, &f)| {
                let z: f64 = StandardNormal.sample(rng);
                (3.0 * row[0]).sin() + row.iter().sum::<f64>() + f64::from(f) * (1.0 + row[0]) + 0.5 * z
            })
            .collect();
        return (ObservationalDataset::from_flags(x, &flags, y).expect("valid dataset"), m);
    }
}

fn record(
    suite: Suite,
    index: usize,
    seed: u64,
    dim: usize,
    m: usize,
    sizes: (usize, usize),
    gaps: &[f64],
) -> InstanceRecord {
    InstanceRecord {
        suite,
        index,
        seed,
        dim,
        m,
        sizes,
        checks: gaps.len(),
        exact: gaps.iter().filter(|&&g| g <= EXACT_TOL).count(),
        max_gap: gaps.iter().copied().fold(0.0, f64::max),
    }
}

/// Evaluation points: up to 8 denominator points, which always lie in their
/// own catchment area.
const EVAL_POINTS: usize = 8;

fn lsif_one_step_instance(index: usize, seed: u64, metric: &Metric<f64>) -> Result<InstanceRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (data, m) = random_two_sample(&mut rng);
    let model = Arc::new(NeighborModel::new(data.denominator().clone(), metric.clone(), m)?);
    let picks = sample(&mut rng, data.n_denominator(), EVAL_POINTS.min(data.n_denominator()));
    let mut gaps = Vec::new();
    for c in picks.iter() {
        let center = data.denominator().row(c).to_vec();
        let basis = IndicatorBasis::new(model.clone(), center.clone(), IndicatorRegion::Catchment)?;
        let fitted = fit(&data, Arc::new(basis), 0.0)?;
        let lsif = fitted.predict(&center)?;
        let k = catchment_count(&model, data.numerator(), &center)?;
        let one_step: f64 = one_step_value(data.n_denominator(), data.n_numerator(), k, m);
        gaps.push((lsif - one_step).abs());
    }
    Ok(record(Suite::LsifOneStep, index, seed, data.dim(), m, (data.n_denominator(), data.n_numerator()), &gaps))
}

fn lattice_observational<R: Rng>(rng: &mut R) -> (ObservationalDataset<f64>, usize) {
    let (ds, m) = random_observational(rng, 1);
    let snapped: Vec<f64> = ds.covariates().as_slice().iter().map(|v| (v * 4.0).round()).collect();
    let x = Points::new(snapped, ds.dim()).expect("finite points");
    let flags: Vec<u8> = ds.treatment().iter().map(|a| a.flag()).collect();
    (ObservationalDataset::from_flags(x, &flags, ds.outcome().to_vec()).expect("valid dataset"), m)
}

/// Matching in which distance ties go to the highest index.
fn reversed_tie_structures(ds: &ObservationalDataset<f64>, metric: &Metric<f64>, m: usize) -> MatchingStructures {
    let neighbors: Vec<Vec<usize>> = (0..ds.len())
        .map(|i| {
            let mut cand: Vec<(f64, usize)> = ds
                .arm_indices(ds.arm(i).opposite())
                .iter()
                .map(|&j| (metric.dist2(ds.x(i), ds.x(j)), j))
                .collect();
            cand.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(b.1.cmp(&a.1)));
            cand.into_iter().take(m).map(|(_, j)| j).collect()
        })
        .collect();
    let mut counts = vec![0; ds.len()];
    for list in &neighbors {
        for &j in list {
            counts[j] += 1;
        }
    }
    MatchingStructures { m, neighbors, counts }
}

fn weight_form_instance(index: usize, seed: u64, metric: &Metric<f64>, fault: Option<Fault>) -> Result<InstanceRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ds, m) = match fault {
        Some(Fault::ReversedTieBreak) => lattice_observational(&mut rng),
        None => random_observational(&mut rng, 1),
    };
    let models = ArmModels::new(&ds, metric, m)?;
    let s = matching_structures_with(&ds, &models)?;
    let matching = ate_matching_with(&ds, &s)?.tau;
    let weight_structures = match fault {
        Some(Fault::ReversedTieBreak) => reversed_tie_structures(&ds, metric, m),
        None => s,
    };
    let weight = ate_weight_form_with(&ds, &weight_structures)?.tau;
    let gaps = [(matching - weight).abs()];
    Ok(record(Suite::WeightForm, index, seed, ds.dim(), m, (ds.n_treated(), ds.n_control()), &gaps))
}

fn indicator_weight_instance(index: usize, seed: u64, metric: &Metric<f64>) -> Result<InstanceRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ds, m) = random_observational(&mut rng, 1);
    let models = ArmModels::new(&ds, metric, m)?;
    let s = matching_structures_with(&ds, &models)?;
    let mut gaps = Vec::with_capacity(ds.len());
    for i in 0..ds.len() {
        let f = indicator_weight_fit(&ds, &models, i, 0.0)?;
        let w = f.weight(ds.x(i))?;
        gaps.push((w - s.weight::<f64>(i)).abs());
    }
    Ok(record(Suite::IndicatorWeights, index, seed, ds.dim(), m, (ds.n_treated(), ds.n_control()), &gaps))
}

/// A random built-in basis for `dim`-dimensional inputs on `[0,1]^dim`.
pub fn random_basis<R: Rng>(rng: &mut R, dim: usize) -> Arc<dyn Basis<f64>> {
    match rng.random_range(0..3) {
        0 => Arc::new(ConstantBasis::new(dim)),
        1 => Arc::new(PolynomialBasis::new(dim, rng.random_range(1..=2)).expect("valid degree")),
        _ => {
            let per_axis = if dim == 1 { 4 } else { 2 };
            let bw = rng.random_range(0.3..0.8);
            Arc::new(GaussianBasis::grid(&vec![0.0; dim], &vec![1.0; dim], per_axis, bw).expect("valid grid"))
        }
    }
}

fn separability_instance(index: usize, seed: u64) -> Result<InstanceRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ds, m) = random_observational(&mut rng, 12);
    let bases = ArmBases { treated: random_basis(&mut rng, ds.dim()), control: random_basis(&mut rng, ds.dim()) };
    let lambda = 10f64.powf(rng.random_range(-4.0..-1.0));
    let joint = riesz_fit(&ds, &bases, lambda)?;
    let t = fit_weight_arm(&ds, Arm::Treated, bases.treated.clone(), lambda)?;
    let c = fit_weight_arm(&ds, Arm::Control, bases.control.clone(), lambda)?;
    let gaps: Vec<f64> = joint
        .weight_model
        .treated
        .theta
        .iter()
        .zip(&t.theta)
        .chain(joint.weight_model.control.theta.iter().zip(&c.theta))
        .map(|(a, b)| (a - b).abs())
        .collect();
    Ok(record(Suite::Separability, index, seed, ds.dim(), m, (ds.n_treated(), ds.n_control()), &gaps))
}

fn dr_instance(index: usize, seed: u64, metric: &Metric<f64>) -> Result<InstanceRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ds, m) = random_observational(&mut rng, 12);
    let degree = rng.random_range(0..=1u32) + u32::from(ds.dim() == 1);
    let outcome = fit_outcome(&ds, degree)?;
    let models = ArmModels::new(&ds, metric, m)?;
    let s = matching_structures_with(&ds, &models)?;
    let bc = ate_bias_corrected_with(&ds, &s, &outcome)?.tau;
    let dr = ate_dr_riesz_with(&ds, &s, &outcome)?.tau;
    let mean_psi = mean_score(&ds, &s, &outcome, dr)?;
    let gaps = [(dr - bc).abs(), mean_psi.abs()];
    Ok(record(Suite::DrAlgebra, index, seed, ds.dim(), m, (ds.n_treated(), ds.n_control()), &gaps))
}

/// Sample mean of `ψ(W, γ̂, α̂, τ)` with `m(W, γ̂) = μ̂₁(X) − μ̂₀(X)` and the
/// nearest-neighbor representer.
pub fn mean_score(
    ds: &ObservationalDataset<f64>,
    s: &MatchingStructures,
    outcome: &crate::matching::OutcomeModel<f64>,
    tau: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..ds.len() {
        let x = ds.x(i);
        let arm = ds.arm(i);
        let m_value = outcome.predict(Arm::Treated, x)? - outcome.predict(Arm::Control, x)?;
        let gamma = outcome.predict(arm, x)?;
        let alpha = arm.sign::<f64>() * s.weight::<f64>(i);
        total += dr_score(m_value, gamma, alpha, ds.y(i), tau)?;
    }
    Ok(total / ds.len() as f64)
}
