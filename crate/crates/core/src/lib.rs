//! Nearest-neighbor matching as density-ratio estimation.
//!
//! Matching with replacement, least-squares importance fitting (LSIF) and
//! Riesz regression for the average treatment effect, with randomized checks
//! that tie them together and a Monte-Carlo harness.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix `f64`.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod linalg;
pub mod lsif;
pub mod matching;
pub mod neighbors;
pub mod points;
pub mod report;
pub mod riesz;
pub mod scalar;
pub mod sim;
pub mod verify;

pub use dataset::{generate, generate_two_sample, load_csv, save_csv, Arm, DensitySpec, DgpSpec};
pub use error::{Error, Result};
pub use lsif::{Basis, ConstantBasis, GaussianBasis, IndicatorBasis, IndicatorRegion, PolynomialBasis};
pub use matching::{
    ate_bias_corrected, ate_dr_riesz, ate_matching, ate_regression_plugin, ate_weight_form, default_match_count,
    fit_outcome, AteVariant,
};
pub use neighbors::{matching_structures, ArmModels, MatchingStructures, Metric};
pub use report::RunReport;
pub use scalar::Scalar;

pub type Points64 = points::Points<f64>;
pub type Dataset = dataset::ObservationalDataset<f64>;
pub type TwoSample = dataset::TwoSampleData<f64>;
pub type Neighbors = neighbors::NeighborModel<f64>;
pub type LsifFit = lsif::LsifFit<f64>;
pub type WeightFit = riesz::ArmWeightFit<f64>;
pub type Representer = riesz::RieszRepresenter<f64>;
pub type Outcome = matching::OutcomeModel<f64>;
pub type Estimate = matching::AteEstimate<f64>;
