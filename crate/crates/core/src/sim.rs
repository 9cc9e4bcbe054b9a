//! Monte-Carlo harness over the built-in data-generating processes.
//!
//! Replication seeds are drawn up front from the base seed, and results are
//! collected in replication order, so output does not depend on the number
//! of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::{generate_with_truth, Arm, DgpSpec};
use crate::error::{Error, Result};
use crate::matching::{
    ate_bias_corrected_with, ate_dr_riesz_with, ate_matching_with, ate_regression_plugin, ate_weight_form_with,
    fit_outcome,
};
use crate::neighbors::{matching_structures, Metric};

/// Runs `f` on a pool of `jobs` threads (`0` = rayon default).
pub fn with_jobs<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Per-replication seeds derived from one base seed.
pub fn replication_seeds(seed: u64, reps: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..reps).map(|_| rng.random()).collect()
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub dgp: DgpSpec,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub m: usize,
    pub degree: u32,
    pub metric: Metric<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub index: usize,
    pub seed: u64,
    pub n_treated: usize,
    pub n_control: usize,
    pub tau_matching: f64,
    pub tau_weight: f64,
    pub tau_reg: f64,
    pub tau_bc: f64,
    pub tau_dr: f64,
    pub max_weight: f64,
}

impl Replication {
    pub const ESTIMATORS: [&'static str; 5] = ["matching", "weight", "reg", "bc", "dr"];

    pub fn estimates(&self) -> [f64; 5] {
        [self.tau_matching, self.tau_weight, self.tau_reg, self.tau_bc, self.tau_dr]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSummary {
    pub estimator: &'static str,
    pub mean: f64,
    /// Sample standard deviation over replications (`n − 1` denominator).
    pub sd: f64,
    pub bias: f64,
    /// `sd / √reps`.
    pub mc_se: f64,
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub true_ate: f64,
    pub replications: Vec<Replication>,
    pub summaries: Vec<EstimatorSummary>,
}

pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn run_replication(cfg: &SimulationConfig, index: usize, seed: u64) -> Result<Replication> {
    let sample = generate_with_truth::<f64>(&cfg.dgp, cfg.n, seed)?;
    let ds = &sample.dataset;
    let s = matching_structures(ds, &cfg.metric, cfg.m)?;
    let outcome = fit_outcome(ds, cfg.degree)?;
    let bc = ate_bias_corrected_with(ds, &s, &outcome)?;
    Ok(Replication {
        index,
        seed,
        n_treated: ds.n_treated(),
        n_control: ds.n_control(),
        tau_matching: ate_matching_with(ds, &s)?.tau,
        tau_weight: ate_weight_form_with(ds, &s)?.tau,
        tau_reg: ate_regression_plugin(ds, &outcome)?.tau,
        tau_bc: bc.tau,
        tau_dr: ate_dr_riesz_with(ds, &s, &outcome)?.tau,
        max_weight: bc.diagnostics.max_weight.unwrap_or(f64::NAN),
    })
}

pub fn run_simulation(cfg: &SimulationConfig, jobs: usize) -> Result<SimulationResult> {
    if cfg.reps == 0 {
        return Err(Error::InvalidInput("need at least one replication".into()));
    }
    let seeds = replication_seeds(cfg.seed, cfg.reps);
    let replications = with_jobs(jobs, || {
        seeds
            .par_iter()
            .enumerate()
            .map(|(r, &s)| run_replication(cfg, r, s))
            .collect::<Result<Vec<_>>>()
    })??;
    let summaries = Replication::ESTIMATORS
        .iter()
        .enumerate()
        .map(|(k, &name)| {
            let values: Vec<f64> = replications.iter().map(|r| r.estimates()[k]).collect();
            let (mean, sd) = mean_sd(&values);
            EstimatorSummary {
                estimator: name,
                mean,
                sd,
                bias: mean - cfg.dgp.true_ate,
                mc_se: sd / (values.len() as f64).sqrt(),
            }
        })
        .collect();
    Ok(SimulationResult { true_ate: cfg.dgp.true_ate, replications, summaries })
}

/// Median over treated units of `|1 + K_M(i)/M − 1/e₀(X_i)|`.
pub fn treated_weight_error(dgp: &DgpSpec, n: usize, m: usize, seed: u64, metric: &Metric<f64>) -> Result<f64> {
    let sample = generate_with_truth::<f64>(dgp, n, seed)?;
    let ds = &sample.dataset;
    let s = matching_structures(ds, metric, m)?;
    let mut errs: Vec<f64> = ds
        .arm_indices(Arm::Treated)
        .iter()
        .map(|&i| (s.weight::<f64>(i) - 1.0 / sample.propensity[i]).abs())
        .collect();
    Ok(median(&mut errs))
}
