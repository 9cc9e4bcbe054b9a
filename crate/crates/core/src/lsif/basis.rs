use std::fmt::Debug;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::neighbors::NeighborModel;
use crate::points::Points;
use crate::scalar::Scalar;

/// Finite feature map `Φ: ℝ^d → ℝ^b` of a linear-in-parameters model.
pub trait Basis<T: Scalar>: Debug + Send + Sync {
    /// Number of features `b`.
    fn size(&self) -> usize;

    /// Dimension of the inputs.
    fn input_dim(&self) -> usize;

    /// Writes `Φ(x)` into `out` (length `b`).
    fn evaluate_into(&self, x: &[T], out: &mut [T]) -> Result<()>;

    /// True when every feature is 0/1-valued.
    fn is_indicator(&self) -> bool {
        false
    }

    fn evaluate(&self, x: &[T]) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.size()];
        self.evaluate_into(x, &mut out)?;
        Ok(out)
    }
}

pub(crate) fn check_input<T: Scalar, B: Basis<T> + ?Sized>(basis: &B, x: &[T]) -> Result<()> {
    if x.len() != basis.input_dim() {
        return Err(Error::DimensionMismatch { expected: basis.input_dim(), found: x.len() });
    }
    Ok(())
}

/// `Φ ≡ 1`.
#[derive(Debug, Clone)]
pub struct ConstantBasis {
    dim: usize,
}

impl ConstantBasis {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl<T: Scalar> Basis<T> for ConstantBasis {
    fn size(&self) -> usize {
        1
    }

    fn input_dim(&self) -> usize {
        self.dim
    }

    fn evaluate_into(&self, x: &[T], out: &mut [T]) -> Result<()> {
        check_input(self, x)?;
        out[0] = T::one();
        Ok(())
    }

    fn is_indicator(&self) -> bool {
        true
    }
}

/// All monomials of total degree `≤ degree`, ordered by degree then
/// lexicographically; the first feature is the constant.
#[derive(Debug, Clone)]
pub struct PolynomialBasis {
    dim: usize,
    degree: u32,
    exponents: Vec<Vec<u32>>,
}

pub const MAX_POLYNOMIAL_DEGREE: u32 = 3;

impl PolynomialBasis {
    pub fn new(dim: usize, degree: u32) -> Result<Self> {
        if degree > MAX_POLYNOMIAL_DEGREE {
            return Err(Error::InvalidInput(format!(
                "polynomial degree {degree} exceeds {MAX_POLYNOMIAL_DEGREE}"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidInput("polynomial basis needs a positive dimension".into()));
        }
        let mut exponents = Vec::new();
        for total in 0..=degree {
            let mut current = vec![0u32; dim];
            push_compositions(total, 0, &mut current, &mut exponents);
        }
        Ok(Self { dim, degree, exponents })
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }
}

fn push_compositions(remaining: u32, axis: usize, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if axis + 1 == current.len() {
        current[axis] = remaining;
        out.push(current.clone());
        return;
    }
    for k in (0..=remaining).rev() {
        current[axis] = k;
        push_compositions(remaining - k, axis + 1, current, out);
    }
    current[axis] = 0;
}

impl<T: Scalar> Basis<T> for PolynomialBasis {
    fn size(&self) -> usize {
        self.exponents.len()
    }

    fn input_dim(&self) -> usize {
        self.dim
    }

    fn evaluate_into(&self, x: &[T], out: &mut [T]) -> Result<()> {
        check_input(self, x)?;
        for (slot, exps) in out.iter_mut().zip(&self.exponents) {
            *slot = exps
                .iter()
                .zip(x)
                .fold(T::one(), |acc, (&e, &v)| if e == 0 { acc } else { acc * v.powi(e as i32) });
        }
        Ok(())
    }
}

/// Gaussian bumps `exp(−‖x − c_k‖² / (2σ²))`.
#[derive(Debug, Clone)]
pub struct GaussianBasis<T> {
    centers: Points<T>,
    bandwidth: T,
}

impl<T: Scalar> GaussianBasis<T> {
    pub fn new(centers: Points<T>, bandwidth: T) -> Result<Self> {
        if !(bandwidth > T::zero()) || !bandwidth.is_finite() {
            return Err(Error::InvalidInput("bandwidth must be positive".into()));
        }
        if centers.is_empty() {
            return Err(Error::InvalidInput("gaussian basis needs at least one center".into()));
        }
        Ok(Self { centers, bandwidth })
    }

    /// Centers on a regular grid with `per_axis` points spanning `[lo_k, hi_k]`.
    pub fn grid(lo: &[T], hi: &[T], per_axis: usize, bandwidth: T) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch { expected: lo.len(), found: hi.len() });
        }
        if per_axis == 0 {
            return Err(Error::InvalidInput("grid needs at least one point per axis".into()));
        }
        let dim = lo.len();
        let total = per_axis.pow(dim as u32);
        let mut data = Vec::with_capacity(total * dim);
        for flat in 0..total {
            let mut rest = flat;
            for k in 0..dim {
                let step = rest % per_axis;
                rest /= per_axis;
                let t = if per_axis == 1 {
                    T::lit(0.5)
                } else {
                    T::count(step) / T::count(per_axis - 1)
                };
                data.push(lo[k] + t * (hi[k] - lo[k]));
            }
        }
        Self::new(Points::new(data, dim)?, bandwidth)
    }

    pub fn centers(&self) -> &Points<T> {
        &self.centers
    }
}

impl<T: Scalar> Basis<T> for GaussianBasis<T> {
    fn size(&self) -> usize {
        self.centers.len()
    }

    fn input_dim(&self) -> usize {
        self.centers.dim()
    }

    fn evaluate_into(&self, x: &[T], out: &mut [T]) -> Result<()> {
        check_input(self, x)?;
        let denom = T::lit(2.0) * self.bandwidth * self.bandwidth;
        for (slot, c) in out.iter_mut().zip(self.centers.rows()) {
            let d2 = c.iter().zip(x).fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b));
            *slot = (-d2 / denom).exp();
        }
        Ok(())
    }
}

/// Which region around the center the indicator selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IndicatorRegion {
    /// `x ∈ A_M(c)`: `‖c − x‖ ≤ ‖X_(M)(x) − x‖`, the catchment area of `c`.
    #[default]
    Catchment,
    /// `‖x − c‖ ≤ ‖X_(M)(c) − c‖`: the ball around `c` reaching its own
    /// `M`-th nearest reference point.
    Ball,
}

/// One-dimensional 0/1 basis localized at a center `c`, with radii taken
/// from a reference sample.
#[derive(Debug, Clone)]
pub struct IndicatorBasis<T> {
    model: Arc<NeighborModel<T>>,
    center: Vec<T>,
    region: IndicatorRegion,
    center_radius2: T,
}

impl<T: Scalar> IndicatorBasis<T> {
    pub fn new(model: Arc<NeighborModel<T>>, center: Vec<T>, region: IndicatorRegion) -> Result<Self> {
        let center_radius2 = model.mth_radius2(&center)?;
        Ok(Self { model, center, region, center_radius2 })
    }

    pub fn center(&self) -> &[T] {
        &self.center
    }

    pub fn region(&self) -> IndicatorRegion {
        self.region
    }

    pub fn model(&self) -> &NeighborModel<T> {
        &self.model
    }

    pub fn contains(&self, x: &[T]) -> Result<bool> {
        check_input(self, x)?;
        let d2 = self.model.metric().dist2(&self.center, x);
        Ok(match self.region {
            IndicatorRegion::Catchment => d2 <= self.model.mth_radius2(x)?,
            IndicatorRegion::Ball => d2 <= self.center_radius2,
        })
    }
}

impl<T: Scalar> Basis<T> for IndicatorBasis<T> {
    fn size(&self) -> usize {
        1
    }

    fn input_dim(&self) -> usize {
        self.center.len()
    }

    fn evaluate_into(&self, x: &[T], out: &mut [T]) -> Result<()> {
        out[0] = if self.contains(x)? { T::one() } else { T::zero() };
        Ok(())
    }

    fn is_indicator(&self) -> bool {
        true
    }
}
