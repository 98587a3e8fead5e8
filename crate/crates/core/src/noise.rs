//! Noise and alternative distributions used by the experiments.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngExt};
use rand_distr::{Cauchy, Distribution, Normal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, StudentsT};

use crate::error::{invalid, Error, Result};
use crate::special;

/// A fully specified univariate distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NoiseSpec {
    /// `N(mean, var)`.
    Normal { mean: f64, var: f64 },
    /// Standard Student t with `nu` degrees of freedom.
    Student { nu: f64 },
    /// Uniform on `[-a, a]`.
    Uniform { a: f64 },
    /// Centered Laplace with scale `b`.
    Laplace { b: f64 },
    /// Centered Cauchy with the given scale.
    Cauchy { scale: f64 },
}

impl NoiseSpec {
    pub const STANDARD_NORMAL: NoiseSpec = NoiseSpec::Normal { mean: 0.0, var: 1.0 };

    pub fn normal(mean: f64, var: f64) -> Result<Self> {
        Self::Normal { mean, var }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        let ok = match self {
            NoiseSpec::Normal { mean, var } => mean.is_finite() && var.is_finite() && var > 0.0,
            NoiseSpec::Student { nu } => nu.is_finite() && nu > 0.0,
            NoiseSpec::Uniform { a } => a.is_finite() && a > 0.0,
            NoiseSpec::Laplace { b } => b.is_finite() && b > 0.0,
            NoiseSpec::Cauchy { scale } => scale.is_finite() && scale > 0.0,
        };
        if ok {
            Ok(self)
        } else {
            Err(invalid(format!("invalid distribution parameters: {self}")))
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        match *self {
            NoiseSpec::Normal { mean, var } => {
                let sd = var.sqrt();
                special::normal_pdf((x - mean) / sd) / sd
            }
            NoiseSpec::Student { nu } => student(nu).pdf(x),
            NoiseSpec::Uniform { a } => {
                if x.abs() <= a {
                    0.5 / a
                } else {
                    0.0
                }
            }
            NoiseSpec::Laplace { b } => (-x.abs() / b).exp() / (2.0 * b),
            NoiseSpec::Cauchy { scale } => {
                let u = x / scale;
                1.0 / (PI * scale * (1.0 + u * u))
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            NoiseSpec::Normal { mean, var } => special::normal_cdf((x - mean) / var.sqrt()),
            NoiseSpec::Student { nu } => student(nu).cdf(x),
            NoiseSpec::Uniform { a } => ((x + a) / (2.0 * a)).clamp(0.0, 1.0),
            NoiseSpec::Laplace { b } => {
                if x < 0.0 {
                    0.5 * (x / b).exp()
                } else {
                    1.0 - 0.5 * (-x / b).exp()
                }
            }
            NoiseSpec::Cauchy { scale } => 0.5 + (x / scale).atan() / PI,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseSpec::Normal { mean, var } => Normal::new(mean, var.sqrt())
                .expect("validated normal")
                .sample(rng),
            NoiseSpec::Student { nu } => StudentT::new(nu).expect("validated student").sample(rng),
            NoiseSpec::Uniform { a } => a * (2.0 * rng.random::<f64>() - 1.0),
            NoiseSpec::Laplace { b } => {
                // Inverse CDF on (-1/2, 1/2).
                let u: f64 = rng.random::<f64>() - 0.5;
                if u == -0.5 {
                    return 0.0;
                }
                -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            NoiseSpec::Cauchy { scale } => Cauchy::new(0.0, scale)
                .expect("validated cauchy")
                .sample(rng),
        }
    }

    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for v in out {
            *v = self.sample(rng);
        }
    }

    pub fn mean(&self) -> Option<f64> {
        match *self {
            NoiseSpec::Normal { mean, .. } => Some(mean),
            NoiseSpec::Student { nu } if nu > 1.0 => Some(0.0),
            NoiseSpec::Student { .. } | NoiseSpec::Cauchy { .. } => None,
            NoiseSpec::Uniform { .. } | NoiseSpec::Laplace { .. } => Some(0.0),
        }
    }

    /// Variance, `None` when infinite or undefined.
    pub fn variance(&self) -> Option<f64> {
        match *self {
            NoiseSpec::Normal { var, .. } => Some(var),
            NoiseSpec::Student { nu } if nu > 2.0 => Some(nu / (nu - 2.0)),
            NoiseSpec::Student { .. } | NoiseSpec::Cauchy { .. } => None,
            NoiseSpec::Uniform { a } => Some(a * a / 3.0),
            NoiseSpec::Laplace { b } => Some(2.0 * b * b),
        }
    }

    pub fn has_finite_variance(&self) -> bool {
        self.variance().is_some()
    }

    /// Points where the density is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            NoiseSpec::Uniform { a } => vec![-a, a],
            NoiseSpec::Laplace { .. } => vec![0.0],
            _ => Vec::new(),
        }
    }

    /// Tail-point `x` with `cdf(x) = p` when a closed form exists, else by bisection.
    pub fn quantile(&self, p: f64) -> f64 {
        match *self {
            NoiseSpec::Normal { mean, var } => mean + var.sqrt() * special::normal_quantile(p),
            NoiseSpec::Uniform { a } => a * (2.0 * p - 1.0),
            NoiseSpec::Laplace { b } => {
                if p < 0.5 {
                    b * (2.0 * p).ln()
                } else {
                    -b * (2.0 - 2.0 * p).ln()
                }
            }
            NoiseSpec::Cauchy { scale } => scale * (PI * (p - 0.5)).tan(),
            NoiseSpec::Student { nu } => student(nu).inverse_cdf(p),
        }
    }
}

fn student(nu: f64) -> StudentsT {
    StudentsT::new(0.0, 1.0, nu).expect("validated student")
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            NoiseSpec::Normal { mean, var } => write!(f, "normal:{mean},{var}"),
            NoiseSpec::Student { nu } => write!(f, "student:{nu}"),
            NoiseSpec::Uniform { a } => write!(f, "uniform:{a}"),
            NoiseSpec::Laplace { b } => write!(f, "laplace:{b}"),
            NoiseSpec::Cauchy { scale } => write!(f, "cauchy:{scale}"),
        }
    }
}

/// Parses `family:p1[,p2]`, e.g. `normal:0,1`, `student:5`, `laplace:1.5`.
impl FromStr for NoiseSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (family, params) = s.split_once(':').unwrap_or((s, ""));
        let params: Vec<f64> = if params.trim().is_empty() {
            Vec::new()
        } else {
            params
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map_err(|_| invalid(format!("bad number {p:?} in {s:?}")))
                })
                .collect::<Result<_>>()?
        };
        let arity = |k: usize| {
            if params.len() == k {
                Ok(())
            } else {
                Err(invalid(format!("{family} takes {k} parameter(s), got {s:?}")))
            }
        };
        let spec = match family.trim().to_ascii_lowercase().as_str() {
            "normal" | "gaussian" => {
                if params.is_empty() {
                    NoiseSpec::STANDARD_NORMAL
                } else {
                    arity(2)?;
                    NoiseSpec::Normal {
                        mean: params[0],
                        var: params[1],
                    }
                }
            }
            "student" | "t" => {
                arity(1)?;
                NoiseSpec::Student { nu: params[0] }
            }
            "uniform" => {
                arity(1)?;
                NoiseSpec::Uniform { a: params[0] }
            }
            "laplace" => {
                arity(1)?;
                NoiseSpec::Laplace { b: params[0] }
            }
            "cauchy" => {
                arity(1)?;
                NoiseSpec::Cauchy { scale: params[0] }
            }
            other => return Err(invalid(format!("unknown distribution family {other:?}"))),
        };
        spec.validated()
    }
}
