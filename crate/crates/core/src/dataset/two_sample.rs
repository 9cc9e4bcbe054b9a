use std::f64::consts::PI;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::TwoSampleData;
use crate::error::{Error, Result};
use crate::points::Points;
use crate::scalar::Scalar;

/// Built-in product densities with closed-form pdfs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensitySpec {
    /// Uniform on the cube `[lo, hi]^dim`.
    Uniform { lo: f64, hi: f64, dim: usize },
    /// Isotropic Gaussian with every coordinate `N(mean, sd²)`.
    Gaussian { mean: f64, sd: f64, dim: usize },
}

impl DensitySpec {
    pub fn dim(&self) -> usize {
        match *self {
            DensitySpec::Uniform { dim, .. } | DensitySpec::Gaussian { dim, .. } => dim,
        }
    }

    pub fn with_dim(self, dim: usize) -> Self {
        match self {
            DensitySpec::Uniform { lo, hi, .. } => DensitySpec::Uniform { lo, hi, dim },
            DensitySpec::Gaussian { mean, sd, .. } => DensitySpec::Gaussian { mean, sd, dim },
        }
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        match *self {
            DensitySpec::Uniform { lo, hi, .. } => {
                if x.iter().all(|&v| (lo..=hi).contains(&v)) {
                    (hi - lo).powi(-(x.len() as i32))
                } else {
                    0.0
                }
            }
            DensitySpec::Gaussian { mean, sd, .. } => x
                .iter()
                .map(|&v| {
                    let z = (v - mean) / sd;
                    (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
                })
                .product(),
        }
    }

    /// `f_num(x) / f_den(x)`; `None` outside the denominator support.
    pub fn ratio(numerator: &DensitySpec, denominator: &DensitySpec, x: &[f64]) -> Option<f64> {
        if let (
            DensitySpec::Gaussian { mean: m1, sd: s1, .. },
            DensitySpec::Gaussian { mean: m0, sd: s0, .. },
        ) = (numerator, denominator)
        {
            // log-space to stay finite in the tails
            let log_r: f64 = x
                .iter()
                .map(|&v| {
                    let z1 = (v - m1) / s1;
                    let z0 = (v - m0) / s0;
                    0.5 * (z0 * z0 - z1 * z1) + (s0 / s1).ln()
                })
                .sum();
            return Some(log_r.exp());
        }
        let den = denominator.pdf(x);
        (den > 0.0).then(|| numerator.pdf(x) / den)
    }

    fn sample_into<R: Rng>(&self, rng: &mut R, out: &mut Vec<f64>) {
        match *self {
            DensitySpec::Uniform { lo, hi, dim } => {
                for _ in 0..dim {
                    out.push(rng.random_range(lo..hi));
                }
            }
            DensitySpec::Gaussian { mean, sd, dim } => {
                for _ in 0..dim {
                    let z: f64 = StandardNormal.sample(rng);
                    out.push(mean + sd * z);
                }
            }
        }
    }
}

impl FromStr for DensitySpec {
    type Err = Error;

    /// `uniform:LO:HI` or `gauss:MEAN:SD`, dimension 1; use
    /// [`DensitySpec::with_dim`] for more.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |k: usize| -> Result<f64> {
            parts
                .get(k)
                .ok_or_else(|| Error::InvalidInput(format!("density `{s}` is missing parameters")))?
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("bad parameter in density `{s}`")))
        };
        let spec = match parts[0] {
            "uniform" if parts.len() == 3 => DensitySpec::Uniform { lo: num(1)?, hi: num(2)?, dim: 1 },
            "gauss" | "gaussian" if parts.len() == 3 => {
                DensitySpec::Gaussian { mean: num(1)?, sd: num(2)?, dim: 1 }
            }
            "uniform" | "gauss" | "gaussian" => {
                return Err(Error::InvalidInput(format!("density `{s}` needs two parameters")))
            }
            other => return Err(Error::UnsupportedDensity(other.to_string())),
        };
        match spec {
            DensitySpec::Uniform { lo, hi, .. } if !(lo < hi) => {
                Err(Error::InvalidInput(format!("empty uniform support in `{s}`")))
            }
            DensitySpec::Gaussian { sd, .. } if !(sd > 0.0) => {
                Err(Error::InvalidInput(format!("non-positive sd in `{s}`")))
            }
            spec => Ok(spec),
        }
    }
}

/// Draws the denominator sample (`n_den` points) and then the numerator
/// sample (`n_num` points) from one seeded stream.
pub fn generate_two_sample<T: Scalar>(
    numerator: &DensitySpec,
    denominator: &DensitySpec,
    n_den: usize,
    n_num: usize,
    seed: u64,
) -> Result<TwoSampleData<T>> {
    if n_den == 0 || n_num == 0 {
        return Err(Error::InvalidInput("both samples need at least one point".into()));
    }
    if numerator.dim() != denominator.dim() {
        return Err(Error::DimensionMismatch { expected: denominator.dim(), found: numerator.dim() });
    }
    let dim = denominator.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |spec: &DensitySpec, n: usize| -> Result<Points<T>> {
        let mut raw = Vec::with_capacity(n * dim);
        for _ in 0..n {
            spec.sample_into(&mut rng, &mut raw);
        }
        Points::new(raw.into_iter().map(T::lit).collect(), dim)
    };
    let den = draw(denominator, n_den)?;
    let num = draw(numerator, n_num)?;
    TwoSampleData::new(den, num)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_laws_have_unit_ratio() {
        let s: DensitySpec = "gauss:0:1".parse().unwrap();
        for x in [-2.0, 0.0, 0.7] {
            assert!((DensitySpec::ratio(&s, &s, &[x]).unwrap() - 1.0).abs() < 1e-15);
        }
        let u: DensitySpec = "uniform:0:1".parse().unwrap();
        assert_eq!(DensitySpec::ratio(&u, &u, &[0.3]), Some(1.0));
    }

    #[test]
    fn nested_uniform_ratio() {
        let den: DensitySpec = "uniform:0:1".parse().unwrap();
        let num: DensitySpec = "uniform:0:0.5".parse().unwrap();
        assert_eq!(DensitySpec::ratio(&num, &den, &[0.2]), Some(2.0));
        assert_eq!(DensitySpec::ratio(&num, &den, &[0.5]), Some(2.0));
        assert_eq!(DensitySpec::ratio(&num, &den, &[0.75]), Some(0.0));
        assert_eq!(DensitySpec::ratio(&num, &den, &[1.5]), None);
    }

    #[test]
    fn shifted_gaussian_ratio() {
        let den: DensitySpec = "gauss:0:1".parse().unwrap();
        let num: DensitySpec = "gauss:1:1".parse().unwrap();
        for x in [-1.5, 0.0, 0.5, 2.0] {
            let r = DensitySpec::ratio(&num, &den, &[x]).unwrap();
            assert!((r - (x - 0.5_f64).exp()).abs() < 1e-13 * r.max(1.0));
        }
    }

    #[test]
    fn unsupported_family() {
        assert!(matches!("cauchy:0:1".parse::<DensitySpec>(), Err(Error::UnsupportedDensity(_))));
    }

    #[test]
    fn sampling_is_seeded() {
        let den: DensitySpec = "uniform:0:1".parse().unwrap();
        let num: DensitySpec = "uniform:0:0.5".parse().unwrap();
        let a: TwoSampleData<f64> = generate_two_sample(&num, &den, 50, 20, 3).unwrap();
        let b: TwoSampleData<f64> = generate_two_sample(&num, &den, 50, 20, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.numerator().rows().all(|z| z[0] <= 0.5));
        assert!(generate_two_sample::<f64>(&num, &den, 0, 1, 3).is_err());
    }
}
