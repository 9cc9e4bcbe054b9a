//! Observational and two-sample data models, CSV ingestion and the
//! synthetic data-generating processes used by the simulation harness.

mod csv_io;
mod dgp;
mod two_sample;

pub use csv_io::{load_csv, load_points_csv, read_csv, read_points_csv, save_csv, write_csv};
pub use dgp::{generate, generate_with_truth, DgpSpec, SimulatedSample, SurfaceFn};
pub use two_sample::{generate_two_sample, DensitySpec};

use crate::error::{Error, Result};
use crate::points::Points;
use crate::scalar::Scalar;

/// Treatment arm of a unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arm {
    Control,
    Treated,
}

impl Arm {
    pub fn from_flag(treated: bool) -> Self {
        if treated {
            Arm::Treated
        } else {
            Arm::Control
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Arm::Control => Arm::Treated,
            Arm::Treated => Arm::Control,
        }
    }

    /// `2D − 1`.
    pub fn sign<T: Scalar>(self) -> T {
        match self {
            Arm::Treated => T::one(),
            Arm::Control => -T::one(),
        }
    }

    pub fn flag(self) -> u8 {
        match self {
            Arm::Treated => 1,
            Arm::Control => 0,
        }
    }
}

/// `n` units of covariates, binary treatment and outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationalDataset<T> {
    covariates: Points<T>,
    treatment: Vec<Arm>,
    outcome: Vec<T>,
    treated: Vec<usize>,
    control: Vec<usize>,
}

impl<T: Scalar> ObservationalDataset<T> {
    pub fn new(covariates: Points<T>, treatment: Vec<Arm>, outcome: Vec<T>) -> Result<Self> {
        let n = covariates.len();
        if treatment.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: treatment.len() });
        }
        if outcome.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: outcome.len() });
        }
        if outcome.iter().any(|y| !y.is_finite()) {
            return Err(Error::InvalidInput("outcomes must be finite".into()));
        }
        let (treated, control): (Vec<usize>, Vec<usize>) =
            (0..n).partition(|&i| treatment[i] == Arm::Treated);
        if treated.is_empty() || control.is_empty() {
            return Err(Error::EmptyTreatmentArm);
        }
        Ok(Self { covariates, treatment, outcome, treated, control })
    }

    /// Builds a dataset from 0/1 flags.
    pub fn from_flags(covariates: Points<T>, flags: &[u8], outcome: Vec<T>) -> Result<Self> {
        let treatment = flags
            .iter()
            .enumerate()
            .map(|(i, &f)| match f {
                0 => Ok(Arm::Control),
                1 => Ok(Arm::Treated),
                _ => Err(Error::NonBinaryTreatment { row: i + 1 }),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(covariates, treatment, outcome)
    }

    pub fn len(&self) -> usize {
        self.outcome.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcome.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.covariates.dim()
    }

    pub fn n_treated(&self) -> usize {
        self.treated.len()
    }

    pub fn n_control(&self) -> usize {
        self.control.len()
    }

    pub fn covariates(&self) -> &Points<T> {
        &self.covariates
    }

    pub fn x(&self, i: usize) -> &[T] {
        self.covariates.row(i)
    }

    pub fn arm(&self, i: usize) -> Arm {
        self.treatment[i]
    }

    pub fn treatment(&self) -> &[Arm] {
        &self.treatment
    }

    pub fn outcome(&self) -> &[T] {
        &self.outcome
    }

    pub fn y(&self, i: usize) -> T {
        self.outcome[i]
    }

    /// Dataset indices of the units in `arm`, ascending.
    pub fn arm_indices(&self, arm: Arm) -> &[usize] {
        match arm {
            Arm::Treated => &self.treated,
            Arm::Control => &self.control,
        }
    }

    pub fn arm_size(&self, arm: Arm) -> usize {
        self.arm_indices(arm).len()
    }

    /// Same units with outcomes replaced.
    pub fn with_outcome(&self, outcome: Vec<T>) -> Result<Self> {
        Self::new(self.covariates.clone(), self.treatment.clone(), outcome)
    }

    /// Units reordered so that new unit `k` is old unit `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let covariates = self.covariates.select(order);
        let treatment = order.iter().map(|&i| self.treatment[i]).collect();
        let outcome = order.iter().map(|&i| self.outcome[i]).collect();
        Self::new(covariates, treatment, outcome)
    }
}

/// Denominator sample `{X_i} ~ ν₀` and numerator sample `{Z_j} ~ ν₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSampleData<T> {
    denominator: Points<T>,
    numerator: Points<T>,
}

impl<T: Scalar> TwoSampleData<T> {
    pub fn new(denominator: Points<T>, numerator: Points<T>) -> Result<Self> {
        if denominator.is_empty() || numerator.is_empty() {
            return Err(Error::InvalidInput("both samples need at least one point".into()));
        }
        if denominator.dim() != numerator.dim() {
            return Err(Error::DimensionMismatch {
                expected: denominator.dim(),
                found: numerator.dim(),
            });
        }
        Ok(Self { denominator, numerator })
    }

    pub fn denominator(&self) -> &Points<T> {
        &self.denominator
    }

    pub fn numerator(&self) -> &Points<T> {
        &self.numerator
    }

    pub fn n_denominator(&self) -> usize {
        self.denominator.len()
    }

    pub fn n_numerator(&self) -> usize {
        self.numerator.len()
    }

    pub fn dim(&self) -> usize {
        self.denominator.dim()
    }
}
