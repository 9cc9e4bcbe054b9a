use std::fs;
use std::io::Write as _;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use nnlsif::dataset::{generate_with_truth, load_points_csv, TwoSampleData};
use nnlsif::lsif::{self, catchment_count, one_step_value};
use nnlsif::matching::{
    ate_bias_corrected_with, ate_dr_riesz_with, ate_matching_with, ate_weight_form_with, impute_with,
};
use nnlsif::neighbors::NeighborModel;
use nnlsif::points::Points;
use nnlsif::report::{simulation_report, verify_report};
use nnlsif::sim::{run_simulation, with_jobs, SimulationConfig};
use nnlsif::verify::{run_verify, Fault, VerifyConfig};
use nnlsif::{
    ate_regression_plugin, default_match_count, fit_outcome, load_csv, matching_structures, Arm, Basis, Dataset,
    DensitySpec, DgpSpec, GaussianBasis, IndicatorBasis, IndicatorRegion, Metric, PolynomialBasis, RunReport,
};

use crate::{AteArgs, BasisArg, Common, DreArgs, EstimatorArg, SimulateArgs, Status, VerifyArgs, WeightsArgs};

fn metric_name(metric: &Metric<f64>) -> String {
    match metric {
        Metric::Euclidean => "euclidean".into(),
        Metric::WeightedEuclidean(w) => {
            let parts: Vec<String> = w.iter().map(f64::to_string).collect();
            format!("weighted:{}", parts.join(","))
        }
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn emit(mut report: RunReport, common: &Common, start: Instant) -> Result<()> {
    if common.timings {
        report.timing("wall_seconds", start.elapsed().as_secs_f64());
    }
    let text = report.render();
    match &common.output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
                _ => {}
            }
        }
    }
    Ok(())
}

fn load_dataset(path: &std::path::Path, metric: &Metric<f64>) -> Result<Dataset> {
    let ds: Dataset = load_csv(path).with_context(|| format!("reading {}", path.display()))?;
    metric.check_dim(ds.dim())?;
    Ok(ds)
}

pub fn ate(a: &AteArgs) -> Result<Status> {
    let start = Instant::now();
    let metric = &a.common.metric;
    let ds = load_dataset(&a.input, metric)?;
    let m = a.m.unwrap_or_else(|| default_match_count(ds.len()));
    let s = with_jobs(a.common.jobs, || matching_structures(&ds, metric, m))??;
    let uses_outcome = matches!(a.estimator, EstimatorArg::Reg | EstimatorArg::Bc | EstimatorArg::Dr);
    let outcome = if uses_outcome { Some(fit_outcome(&ds, a.degree)?) } else { None };
    let est = match (a.estimator, &outcome) {
        (EstimatorArg::Matching, _) => ate_matching_with(&ds, &s)?,
        (EstimatorArg::Weight, _) => ate_weight_form_with(&ds, &s)?,
        (EstimatorArg::Reg, Some(o)) => ate_regression_plugin(&ds, o)?,
        (EstimatorArg::Bc, Some(o)) => ate_bias_corrected_with(&ds, &s, o)?,
        (EstimatorArg::Dr, Some(o)) => ate_dr_riesz_with(&ds, &s, o)?,
        _ => unreachable!("outcome model fitted for regression-based estimators"),
    };
    let max_weight = (0..ds.len()).map(|i| s.weight::<f64>(i)).fold(f64::MIN, f64::max);

    let mut r = RunReport::new();
    r.field("command", "ate")
        .field("input", a.input.display())
        .field("estimator", est.variant.name())
        .field("seed", a.common.seed)
        .field("metric", metric_name(metric))
        .field("m", m);
    if uses_outcome {
        r.field("degree", a.degree);
    }
    r.field("n", ds.len())
        .field("n1", ds.n_treated())
        .field("n0", ds.n_control())
        .field("dim", ds.dim())
        .field("max_weight", max_weight)
        .field("tau", est.tau);
    for (i, (y0, y1)) in impute_with(&ds, &s)?.into_iter().enumerate() {
        r.record(vec![
            ("i", i.to_string()),
            ("d", ds.arm(i).flag().to_string()),
            ("k", s.count(i).to_string()),
            ("w", s.weight::<f64>(i).to_string()),
            ("y0_hat", y0.to_string()),
            ("y1_hat", y1.to_string()),
        ]);
    }
    emit(r, &a.common, start)?;
    Ok(Status::Ok)
}

struct DreInput {
    data: TwoSampleData<f64>,
    densities: Option<(DensitySpec, DensitySpec)>,
    source: String,
}

fn dre_input(a: &DreArgs) -> Result<DreInput> {
    if let (Some(den), Some(num)) = (&a.denominator, &a.numerator) {
        let d: Points<f64> = load_points_csv(den).with_context(|| format!("reading {}", den.display()))?;
        let n: Points<f64> = load_points_csv(num).with_context(|| format!("reading {}", num.display()))?;
        return Ok(DreInput {
            data: TwoSampleData::new(d, n)?,
            densities: None,
            source: format!("{}|{}", den.display(), num.display()),
        });
    }
    let (Some(den), Some(num)) = (&a.denominator_density, &a.numerator_density) else {
        bail!("give --denominator/--numerator files or --denominator-density/--numerator-density");
    };
    let den_spec = den.parse::<DensitySpec>()?.with_dim(a.dim);
    let num_spec = num.parse::<DensitySpec>()?.with_dim(a.dim);
    let data = nnlsif::generate_two_sample(&num_spec, &den_spec, a.n_den, a.n_num, a.common.seed)?;
    Ok(DreInput { data, densities: Some((num_spec, den_spec)), source: format!("{den}|{num}") })
}

fn gaussian_basis(a: &DreArgs, data: &TwoSampleData<f64>) -> Result<GaussianBasis<f64>> {
    let dim = data.dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for row in data.denominator().rows().chain(data.numerator().rows()) {
        for k in 0..dim {
            lo[k] = lo[k].min(row[k]);
            hi[k] = hi[k].max(row[k]);
        }
    }
    let per_axis = a.centers.unwrap_or(match dim {
        1 => 5,
        2 => 3,
        _ => 2,
    });
    let span = lo.iter().zip(&hi).map(|(l, h)| h - l).sum::<f64>() / dim as f64;
    let bandwidth = a.bandwidth.unwrap_or(if span > 0.0 { span / per_axis as f64 } else { 1.0 });
    Ok(GaussianBasis::grid(&lo, &hi, per_axis, bandwidth)?)
}

pub fn dre(a: &DreArgs) -> Result<Status> {
    let start = Instant::now();
    let metric = &a.common.metric;
    let input = dre_input(a)?;
    let data = &input.data;
    metric.check_dim(data.dim())?;
    let eval = match &a.eval_points {
        Some(p) => load_points_csv::<f64>(p).with_context(|| format!("reading {}", p.display()))?,
        None => data.denominator().clone(),
    };
    if eval.dim() != data.dim() {
        bail!(nnlsif::Error::DimensionMismatch { expected: data.dim(), found: eval.dim() });
    }

    let mut r = RunReport::new();
    r.field("command", "dre")
        .field("source", &input.source)
        .field("basis", format!("{:?}", a.basis).to_lowercase())
        .field("seed", a.common.seed)
        .field("metric", metric_name(metric))
        .field("n_den", data.n_denominator())
        .field("n_num", data.n_numerator())
        .field("dim", data.dim())
        .field("eval_points", eval.len());
    let truth = |x: &[f64]| input.densities.and_then(|(num, den)| DensitySpec::ratio(&num, &den, x));

    if a.basis == BasisArg::Indicator {
        let lambda = a.lambda.unwrap_or(0.0);
        let model = Arc::new(NeighborModel::new(data.denominator().clone(), metric.clone(), a.m)?);
        r.field("m", a.m).field("lambda", lambda);
        let rows = with_jobs(a.common.jobs, || {
            use rayon::prelude::*;
            (0..eval.len())
                .into_par_iter()
                .map(|e| indicator_row(data, &model, eval.row(e), lambda))
                .collect::<nnlsif::Result<Vec<_>>>()
        })??;
        let max_gap = rows.iter().filter_map(|row| row.lsif.map(|v| (v - row.one_step).abs())).fold(0.0, f64::max);
        let singular = rows.iter().filter(|row| row.lsif.is_none()).count();
        r.field("max_gap", max_gap).field("singular_points", singular);
        for (e, row) in rows.iter().enumerate() {
            let x = eval.row(e);
            let mut pairs = vec![
                ("point", e.to_string()),
                ("x", join(x)),
                ("r_hat", row.lsif.map_or("nan".into(), |v| v.to_string())),
                ("r_one_step", row.one_step.to_string()),
                ("k", row.k.to_string()),
                ("support", row.support.to_string()),
            ];
            if let Some(t) = truth(x) {
                pairs.push(("r_true", t.to_string()));
            }
            r.record(pairs);
        }
    } else {
        let basis: Arc<dyn Basis<f64>> = match a.basis {
            BasisArg::Poly => Arc::new(PolynomialBasis::new(data.dim(), a.degree)?),
            _ => Arc::new(gaussian_basis(a, data)?),
        };
        let fitted = match a.lambda {
            Some(l) => lsif::fit(data, basis, l)?,
            None => lsif::fit_default_lambda(data, basis)?,
        };
        r.field("lambda", fitted.lambda)
            .field("basis_size", fitted.beta.len())
            .field("beta", join(&fitted.beta))
            .field("objective", fitted.objective(&fitted.beta))
            .field("stationarity_residual", fitted.stationarity_residual());
        for (e, x) in eval.rows().enumerate() {
            let mut pairs = vec![("point", e.to_string()), ("x", join(x)), ("r_hat", fitted.predict(x)?.to_string())];
            if let Some(t) = truth(x) {
                pairs.push(("r_true", t.to_string()));
            }
            r.record(pairs);
        }
    }
    emit(r, &a.common, start)?;
    Ok(Status::Ok)
}

struct IndicatorRow {
    /// `None` when no denominator point lies in the indicator's support.
    lsif: Option<f64>,
    one_step: f64,
    k: usize,
    support: usize,
}

fn indicator_row(
    data: &TwoSampleData<f64>,
    model: &Arc<NeighborModel<f64>>,
    center: &[f64],
    lambda: f64,
) -> nnlsif::Result<IndicatorRow> {
    let k = catchment_count(model, data.numerator(), center)?;
    let one_step = one_step_value(data.n_denominator(), data.n_numerator(), k, model.m());
    let basis = IndicatorBasis::new(model.clone(), center.to_vec(), IndicatorRegion::Catchment)?;
    let mut support = 0;
    for x in data.denominator().rows() {
        support += usize::from(basis.contains(x)?);
    }
    let lsif = match lsif::fit(data, Arc::new(basis), lambda) {
        Ok(f) => Some(f.predict(center)?),
        Err(nnlsif::Error::Singular { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(IndicatorRow { lsif, one_step, k, support })
}

pub fn weights(a: &WeightsArgs) -> Result<Status> {
    let start = Instant::now();
    let metric = &a.common.metric;
    let (ds, oracle, source) = match (&a.input, &a.dgp) {
        (Some(path), _) => (load_dataset(path, metric)?, None, path.display().to_string()),
        (None, Some(name)) => {
            let spec = DgpSpec::builtin(name, a.dim)?;
            metric.check_dim(spec.dim)?;
            let sample = generate_with_truth::<f64>(&spec, a.n, a.common.seed)?;
            let ds = sample.dataset;
            let oracle: Vec<f64> = (0..ds.len()).map(|i| spec.inverse_propensity(ds.arm(i), ds.x(i))).collect();
            (ds, Some(oracle), name.clone())
        }
        (None, None) => bail!("give --input or --dgp"),
    };
    let m = a.m.unwrap_or_else(|| default_match_count(ds.len()));
    let s = with_jobs(a.common.jobs, || matching_structures(&ds, metric, m))??;
    let w: Vec<f64> = (0..ds.len()).map(|i| s.weight::<f64>(i)).collect();

    let mut r = RunReport::new();
    r.field("command", "weights")
        .field("source", source)
        .field("seed", a.common.seed)
        .field("metric", metric_name(metric))
        .field("m", m)
        .field("n", ds.len())
        .field("n1", ds.n_treated())
        .field("n0", ds.n_control())
        .field("dim", ds.dim())
        .field("max_weight", w.iter().copied().fold(f64::MIN, f64::max));
    for arm in [Arm::Treated, Arm::Control] {
        let total: usize = ds.arm_indices(arm).iter().map(|&i| s.count(i)).sum();
        r.field(&format!("k_sum.d{}", arm.flag()), total);
    }
    if let Some(o) = &oracle {
        let mae = w.iter().zip(o).map(|(a, b)| (a - b).abs()).sum::<f64>() / w.len() as f64;
        r.field("mean_abs_error", mae);
    }
    for i in 0..ds.len() {
        let mut pairs = vec![
            ("i", i.to_string()),
            ("d", ds.arm(i).flag().to_string()),
            ("k", s.count(i).to_string()),
            ("w", w[i].to_string()),
        ];
        if let Some(o) = &oracle {
            pairs.push(("w_oracle", o[i].to_string()));
        }
        r.record(pairs);
    }
    emit(r, &a.common, start)?;
    Ok(Status::Ok)
}

pub fn simulate(a: &SimulateArgs) -> Result<Status> {
    let start = Instant::now();
    let mut dgp = DgpSpec::builtin(&a.dgp, a.dim)?;
    if let Some(sd) = a.noise_sd {
        if !(sd >= 0.0 && sd.is_finite()) {
            bail!("--noise-sd must be a finite non-negative number");
        }
        dgp = dgp.with_noise_sd(sd);
    }
    a.common.metric.check_dim(dgp.dim)?;
    let cfg = SimulationConfig {
        dgp,
        n: a.n,
        reps: a.reps,
        seed: a.common.seed,
        m: a.m.unwrap_or_else(|| default_match_count(a.n)),
        degree: a.degree,
        metric: a.common.metric.clone(),
    };
    let result = run_simulation(&cfg, a.common.jobs)?;
    emit(simulation_report(&cfg, &result), &a.common, start)?;
    Ok(Status::Ok)
}

pub fn verify(a: &VerifyArgs) -> Result<Status> {
    let start = Instant::now();
    if a.instances == 0 {
        bail!("--instances must be at least 1");
    }
    let cfg = VerifyConfig {
        instances: a.instances,
        seed: a.common.seed,
        metric: a.common.metric.clone(),
        fault: a.inject_fault.then_some(Fault::ReversedTieBreak),
    };
    let report = run_verify(&cfg, a.common.jobs)?;
    emit(verify_report(&cfg, &report), &a.common, start)?;
    Ok(if report.passed() { Status::Ok } else { Status::CheckFailed })
}
