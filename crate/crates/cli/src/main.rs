//! `nnlsif` command-line front end.
//!
//! Exit status: 0 on success, 1 when a verification check fails, 2 on bad
//! input (unreadable files, invalid flags, degenerate data).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nnlsif::Metric;

#[derive(Debug, Parser)]
#[command(name = "nnlsif", version, about = "Nearest-neighbor matching, LSIF and Riesz regression for the ATE")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// `euclidean` or `weighted:W0,W1,...`.
    #[arg(long, default_value = "euclidean")]
    pub metric: Metric<f64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Append a `[timings]` section with wall-clock seconds.
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the ATE from a CSV with columns x0..x{d-1},d,y.
    Ate(AteArgs),
    /// Estimate a density ratio f1/f0 at evaluation points.
    Dre(DreArgs),
    /// Per-unit matched-times counts and weights 1 + K/M.
    Weights(WeightsArgs),
    /// Monte-Carlo replications on a built-in data-generating process.
    Simulate(SimulateArgs),
    /// Randomized equivalence checks between the estimators.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EstimatorArg {
    Matching,
    Weight,
    Reg,
    Bc,
    Dr,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum BasisArg {
    Indicator,
    Poly,
    Gauss,
}

#[derive(Debug, Args)]
pub struct AteArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Matches per unit; defaults to ceil(2 n^(1/3)).
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Matching)]
    pub estimator: EstimatorArg,
    /// Total degree of the outcome regression (reg, bc, dr).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(0..=3))]
    pub degree: u32,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct DreArgs {
    /// Denominator sample, columns x0..x{d-1}.
    #[arg(long, requires = "numerator", conflicts_with = "denominator_density")]
    pub denominator: Option<PathBuf>,
    /// Numerator sample, columns x0..x{d-1}.
    #[arg(long, requires = "denominator")]
    pub numerator: Option<PathBuf>,
    /// Synthetic denominator density, `uniform:LO:HI` or `gauss:MEAN:SD`.
    #[arg(long, requires = "numerator_density")]
    pub denominator_density: Option<String>,
    #[arg(long, requires = "denominator_density")]
    pub numerator_density: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[arg(long, default_value_t = 500)]
    pub n_den: usize,
    #[arg(long, default_value_t = 500)]
    pub n_num: usize,
    /// Points to evaluate at; defaults to the denominator sample.
    #[arg(long)]
    pub eval_points: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    /// Ridge penalty; defaults to 0 for the indicator basis and a small
    /// trace-scaled value otherwise.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_enum, default_value_t = BasisArg::Indicator)]
    pub basis: BasisArg,
    /// Polynomial basis degree.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(0..=3))]
    pub degree: u32,
    /// Gaussian centers per axis.
    #[arg(long)]
    pub centers: Option<usize>,
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct WeightsArgs {
    #[arg(long, conflicts_with = "dgp", required_unless_present = "dgp")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub dgp: Option<String>,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[arg(long)]
    pub m: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value = "logistic")]
    pub dgp: String,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(0..=3))]
    pub degree: u32,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[arg(long)]
    pub noise_sd: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 200)]
    pub instances: usize,
    /// Negative control: break the matching tie rule on purpose.
    #[arg(long, hide = true)]
    pub inject_fault: bool,
    #[command(flatten)]
    pub common: Common,
}

/// Outcome of a command that ran to completion.
pub enum Status {
    Ok,
    CheckFailed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ate(a) => commands::ate(a),
        Command::Dre(a) => commands::dre(a),
        Command::Weights(a) => commands::weights(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Verify(a) => commands::verify(a),
    };
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::CheckFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
