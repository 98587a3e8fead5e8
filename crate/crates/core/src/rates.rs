//! Empirical growth rates of AR functionals and estimator errors, and the
//! `λ = 1` scaling experiment for the Bickel-Rosenblatt statistic.
//!
//! A rate check simulates each `n` of a grid `reps` times from zero initial
//! values and standard normal innovations, takes the median magnitude of the
//! quantity, and fits a least-squares slope to `(ln n, ln median)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ar::{simulate_with_rng, ArModel, ReferenceModel};
use crate::error::{invalid, Error, Result};
use crate::estimation::{fit_and_residuals, ols_estimate};
use crate::gof::empirical_quantile;
use crate::kde::{Bandwidth, Kernel, KernelSpec};
use crate::montecarlo::ModelSpec;
use crate::noise::NoiseSpec;
use crate::par::map_indexed;
use crate::quadrature::{integrate_with_breaks, QuadConfig};
use crate::rng::{derive_seed, stream};
use crate::stat::{t_hat, truncated_mu, WeightFn};

pub const DEFAULT_RATE_TOLERANCE: f64 = 0.15;
pub const DEFAULT_RATE_REPS: usize = 200;

/// Slope below which an error decay counts as faster than any power.
pub const SUPER_POLYNOMIAL_SLOPE: f64 = -2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateQuantity {
    /// `Σ X_t` with a root at `+1`.
    SumPosUnit,
    /// `Σ X_t` with a root at `-1`.
    SumNegUnit,
    /// `Σ X_t²` for the random walk.
    SumSquaresUnstable,
    /// `max |X_t|` for the random walk.
    MaxAbsUnstable,
    /// `Σ X_t` for `X_t = X_{t-s} + ε_t`.
    SumSeasonal { s: usize },
    /// `Σ X_t` for `X_t = 2cos(θ) X_{t-1} - X_{t-2} + ε_t`.
    SumCosine { angle: f64 },
    /// `Σ X_t` for the double root at `+1`.
    SumDoubleRoot,
    /// `Σ X_t` for `X_t = X_{t-2} + ε_t`.
    SumLag2,
    /// `‖θ̂ - θ‖` for the stable reference model.
    EstErrorStable,
    /// `‖θ̂ - θ‖` for the random walk.
    EstErrorUnstable,
    /// `‖θ̂ - θ‖` for the explosive reference model.
    EstErrorExplosive,
}

impl RateQuantity {
    pub const CATALOGUE: [RateQuantity; 11] = [
        RateQuantity::SumPosUnit,
        RateQuantity::SumNegUnit,
        RateQuantity::SumSquaresUnstable,
        RateQuantity::MaxAbsUnstable,
        RateQuantity::SumSeasonal { s: 4 },
        RateQuantity::SumCosine { angle: std::f64::consts::FRAC_PI_3 },
        RateQuantity::SumDoubleRoot,
        RateQuantity::SumLag2,
        RateQuantity::EstErrorStable,
        RateQuantity::EstErrorUnstable,
        RateQuantity::EstErrorExplosive,
    ];

    pub fn model(&self) -> Result<ArModel> {
        match *self {
            RateQuantity::SumPosUnit
            | RateQuantity::SumSquaresUnstable
            | RateQuantity::MaxAbsUnstable
            | RateQuantity::EstErrorUnstable => Ok(ReferenceModel::M4.model()),
            RateQuantity::SumNegUnit => Ok(ReferenceModel::M3.model()),
            RateQuantity::SumSeasonal { s } => ArModel::seasonal(s),
            RateQuantity::SumCosine { angle } => ArModel::new(vec![2.0 * angle.cos(), -1.0]),
            RateQuantity::SumDoubleRoot => ArModel::new(vec![2.0, -1.0]),
            RateQuantity::SumLag2 => ArModel::new(vec![0.0, 1.0]),
            RateQuantity::EstErrorStable => Ok(ReferenceModel::M1.model()),
            RateQuantity::EstErrorExplosive => Ok(ReferenceModel::M5.model()),
        }
    }

    /// Theoretical log-log slope; `None` for super-polynomial decay.
    pub fn theory(&self) -> Option<f64> {
        match self {
            RateQuantity::SumPosUnit => Some(1.5),
            RateQuantity::SumNegUnit => Some(0.5),
            RateQuantity::SumSquaresUnstable => Some(2.0),
            RateQuantity::MaxAbsUnstable => Some(0.5),
            RateQuantity::SumSeasonal { .. } => Some(1.5),
            RateQuantity::SumCosine { .. } => Some(0.5),
            RateQuantity::SumDoubleRoot => Some(2.5),
            RateQuantity::SumLag2 => Some(1.5),
            RateQuantity::EstErrorStable => Some(-0.5),
            RateQuantity::EstErrorUnstable => Some(-1.0),
            RateQuantity::EstErrorExplosive => None,
        }
    }

    /// Grid used when none is given: `2⁸..2¹³`, or `16..128` for the
    /// explosive model, whose paths overflow long before `2⁸` steps matter.
    pub fn default_grid(&self) -> Vec<usize> {
        match self {
            RateQuantity::EstErrorExplosive => vec![16, 32, 64, 128],
            _ => (8..=13).map(|k| 1usize << k).collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            RateQuantity::SumSeasonal { s } if s == 0 => Err(invalid("season length must be positive")),
            RateQuantity::SumCosine { angle } if !(angle > 0.0 && angle <= std::f64::consts::PI) => {
                Err(invalid(format!("cosine angle must lie in (0, π], got {angle}")))
            }
            _ => Ok(()),
        }
    }

    fn measure(&self, model: &ArModel, n: usize, rng: &mut crate::rng::StreamRng) -> Result<f64> {
        let series = simulate_with_rng(model, &NoiseSpec::STANDARD_NORMAL, n, None, rng)?;
        let x = series.observations();
        Ok(match self {
            RateQuantity::SumSquaresUnstable => x.iter().map(|v| v * v).sum(),
            RateQuantity::MaxAbsUnstable => x.iter().fold(0.0, |m: f64, v| m.max(v.abs())),
            RateQuantity::EstErrorStable | RateQuantity::EstErrorUnstable | RateQuantity::EstErrorExplosive => {
                let fit = ols_estimate(&series, model.order())?;
                fit.theta_hat
                    .iter()
                    .zip(model.theta())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            }
            _ => x.iter().sum::<f64>().abs(),
        })
    }
}

impl fmt::Display for RateQuantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateQuantity::SumPosUnit => f.write_str("sum-xt-pos-unit"),
            RateQuantity::SumNegUnit => f.write_str("sum-xt-neg-unit"),
            RateQuantity::SumSquaresUnstable => f.write_str("sum-xt2-unstable"),
            RateQuantity::MaxAbsUnstable => f.write_str("max-abs-xt-unstable"),
            RateQuantity::SumSeasonal { s } => write!(f, "sum-xt-seasonal:{s}"),
            RateQuantity::SumCosine { angle } => write!(f, "sum-xt-cosine:{angle}"),
            RateQuantity::SumDoubleRoot => f.write_str("sum-xt-double-root"),
            RateQuantity::SumLag2 => f.write_str("sum-xt-lag2"),
            RateQuantity::EstErrorStable => f.write_str("est-error-stable"),
            RateQuantity::EstErrorUnstable => f.write_str("est-error-unstable"),
            RateQuantity::EstErrorExplosive => f.write_str("est-error-explosive"),
        }
    }
}

impl FromStr for RateQuantity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((a, b)) => (a, Some(b)),
            None => (s, None),
        };
        let q = match name {
            "sum-xt-pos-unit" => RateQuantity::SumPosUnit,
            "sum-xt-neg-unit" => RateQuantity::SumNegUnit,
            "sum-xt2-unstable" => RateQuantity::SumSquaresUnstable,
            "max-abs-xt-unstable" => RateQuantity::MaxAbsUnstable,
            "sum-xt-seasonal" => RateQuantity::SumSeasonal {
                s: arg
                    .map(|a| a.parse().map_err(|_| invalid(format!("bad season length {a:?}"))))
                    .transpose()?
                    .unwrap_or(4),
            },
            "sum-xt-cosine" => RateQuantity::SumCosine {
                angle: arg
                    .map(|a| a.parse().map_err(|_| invalid(format!("bad angle {a:?}"))))
                    .transpose()?
                    .unwrap_or(std::f64::consts::FRAC_PI_3),
            },
            "sum-xt-double-root" => RateQuantity::SumDoubleRoot,
            "sum-xt-lag2" => RateQuantity::SumLag2,
            "est-error-stable" => RateQuantity::EstErrorStable,
            "est-error-unstable" => RateQuantity::EstErrorUnstable,
            "est-error-explosive" => RateQuantity::EstErrorExplosive,
            _ => return Err(invalid(format!("unknown rate quantity {s:?}"))),
        };
        let takes_arg = matches!(q, RateQuantity::SumSeasonal { .. } | RateQuantity::SumCosine { .. });
        if arg.is_some() && !takes_arg {
            return Err(invalid(format!("{name} takes no parameter")));
        }
        q.validate()?;
        Ok(q)
    }
}

impl Serialize for RateQuantity {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RateQuantity {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub quantity: RateQuantity,
    pub theta: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub medians: Vec<f64>,
    pub slope: f64,
    pub theory: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    pub reps: usize,
    pub seed: u64,
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    empirical_quantile(&v, 0.5)
}

pub fn rate_check(quantity: RateQuantity, n_grid: &[usize], reps: usize, seed: u64, tolerance: f64) -> Result<RateReport> {
    quantity.validate()?;
    if n_grid.len() < 3 {
        return Err(invalid(format!("rate check needs at least 3 grid points, got {}", n_grid.len())));
    }
    if reps == 0 {
        return Err(invalid("reps must be at least 1"));
    }
    let model = quantity.model()?;
    if n_grid.iter().any(|&n| n <= model.order() + 1) {
        return Err(invalid("grid sizes must exceed the model order + 1"));
    }
    let mut medians = Vec::with_capacity(n_grid.len());
    for (i, &n) in n_grid.iter().enumerate() {
        let master = derive_seed(seed, i as u64, n as u64);
        let values = map_indexed(reps, |rep| quantity.measure(&model, n, &mut stream(master, rep as u64, 0)));
        medians.push(median(values.into_iter().collect::<Result<Vec<_>>>()?));
    }
    let lx: Vec<f64> = n_grid.iter().map(|&n| (n as f64).ln()).collect();
    let ly: Vec<f64> = medians.iter().map(|m| m.ln()).collect();
    let slope = ols_slope(&lx, &ly);
    let theory = quantity.theory();
    let pass = match theory {
        Some(t) => (slope - t).abs() <= tolerance,
        None => slope < SUPER_POLYNOMIAL_SLOPE,
    };
    Ok(RateReport {
        quantity,
        theta: model.theta().to_vec(),
        n_grid: n_grid.to_vec(),
        medians,
        slope,
        theory,
        tolerance,
        pass,
        reps,
        seed,
    })
}

/// Parses `"256:8192"` (powers of two between the bounds) or a comma list.
pub fn parse_grid(s: &str) -> Result<Vec<usize>> {
    let bad = || invalid(format!("bad n grid {s:?}"));
    if let Some((a, b)) = s.split_once(':') {
        let lo: usize = a.trim().parse().map_err(|_| bad())?;
        let hi: usize = b.trim().parse().map_err(|_| bad())?;
        if lo == 0 || hi < lo {
            return Err(bad());
        }
        let mut out = Vec::new();
        let mut n = lo;
        while n <= hi {
            out.push(n);
            n = n.checked_mul(2).ok_or_else(bad)?;
        }
        Ok(out)
    } else {
        s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
    }
}

/// Configuration of the `λ = 1` scaling experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymConfig {
    pub model: ModelSpec,
    pub kernel: KernelSpec,
    pub bandwidth: Bandwidth,
    pub delta: f64,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymRow {
    pub n: usize,
    pub h: f64,
    /// Median of `|h (T̂ - μ)|`.
    pub median_h_scaled: f64,
    /// Median of `|(T̂ - μ)/√h|`.
    pub median_sqrt_scaled: f64,
    /// 0.95 quantile of `h (T̂ - μ)`.
    pub q95_h_scaled: f64,
    /// 0.95 quantile of `(T̂ - μ)/√h`.
    pub q95_sqrt_scaled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymReport {
    pub kernel: KernelSpec,
    pub kernel_derivative: f64,
    /// `σ² ∫f² a (∫K′)²`; multiplies the Wiener functional in the limit of
    /// `h (T̂ - μ)`.
    pub limit_scale: f64,
    pub rows: Vec<AsymRow>,
    /// Ratios of consecutive `median_h_scaled`.
    pub ratios_h_scaled: Vec<f64>,
    /// Ratios of consecutive `median_sqrt_scaled`.
    pub ratios_sqrt_scaled: Vec<f64>,
}

/// Tracks `h(T̂ - μ)` and `(T̂ - μ)/√h` across `n` on a unit-root model
/// with standard normal innovations, tested against `f₀ = N(0, 1)`.
pub fn asym_kernel_experiment(cfg: &AsymConfig) -> Result<AsymReport> {
    if cfg.n_grid.len() < 2 || cfg.reps == 0 {
        return Err(invalid("need at least two grid sizes and one replication"));
    }
    let model = cfg.model.model();
    let f0 = NoiseSpec::STANDARD_NORMAL;
    let kernel = Kernel::new(cfg.kernel)?;
    let weight = WeightFn::truncated_reciprocal(f0, cfg.delta)?;
    let mu = truncated_mu(cfg.delta, &kernel);
    let kd = kernel.functionals().derivative_integral;
    let ffa = integrate_with_breaks(|x| f0.density(x).powi(2) * weight.eval(x), &[-cfg.delta, cfg.delta], &QuadConfig::default())?.value;
    let limit_scale = f0.variance().expect("finite") * ffa * kd * kd;

    let mut rows = Vec::with_capacity(cfg.n_grid.len());
    for (i, &n) in cfg.n_grid.iter().enumerate() {
        let h = cfg.bandwidth.at(n);
        let master = derive_seed(cfg.seed, i as u64, n as u64);
        let diffs = map_indexed(cfg.reps, |rep| -> Result<f64> {
            let series = simulate_with_rng(&model, &f0, n, None, &mut stream(master, rep as u64, 0))?;
            let (_, res) = fit_and_residuals(&series, model.order())?;
            Ok(t_hat(&res, &kernel, h, &f0, &weight)? - mu)
        });
        let diffs: Vec<f64> = diffs.into_iter().collect::<Result<_>>()?;
        let mut hs: Vec<f64> = diffs.iter().map(|d| h * d).collect();
        let mut ss: Vec<f64> = diffs.iter().map(|d| d / h.sqrt()).collect();
        hs.sort_by(f64::total_cmp);
        ss.sort_by(f64::total_cmp);
        rows.push(AsymRow {
            n,
            h,
            median_h_scaled: median(hs.iter().map(|v| v.abs()).collect()),
            median_sqrt_scaled: median(ss.iter().map(|v| v.abs()).collect()),
            q95_h_scaled: empirical_quantile(&hs, 0.95),
            q95_sqrt_scaled: empirical_quantile(&ss, 0.95),
        });
    }
    let ratios = |get: fn(&AsymRow) -> f64| rows.windows(2).map(|w| get(&w[1]) / get(&w[0])).collect();
    Ok(AsymReport {
        kernel: cfg.kernel,
        kernel_derivative: kd,
        limit_scale,
        ratios_h_scaled: ratios(|r| r.median_h_scaled),
        ratios_sqrt_scaled: ratios(|r| r.median_sqrt_scaled),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_law() {
        let x: Vec<f64> = [1.0f64, 2.0, 4.0, 8.0].iter().map(|v| v.ln()).collect();
        let y: Vec<f64> = [1.0f64, 2.0, 4.0, 8.0].iter().map(|v| (3.0 * v.powf(1.5)).ln()).collect();
        assert!((ols_slope(&x, &y) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("256:8192").unwrap(), vec![256, 512, 1024, 2048, 4096, 8192]);
        assert_eq!(parse_grid("10, 20,40").unwrap(), vec![10, 20, 40]);
        assert!(parse_grid("8:4").is_err());
        assert!(parse_grid("a:b").is_err());
    }

    #[test]
    fn quantity_names_round_trip() {
        for q in RateQuantity::CATALOGUE {
            let back: RateQuantity = q.to_string().parse().unwrap();
            assert_eq!(back, q);
        }
        assert_eq!("sum-xt-seasonal:12".parse::<RateQuantity>().unwrap(), RateQuantity::SumSeasonal { s: 12 });
        assert!("sum-xt-lag2:3".parse::<RateQuantity>().is_err());
        assert!("sum-xt-cosine:4".parse::<RateQuantity>().is_err());
        assert!("nope".parse::<RateQuantity>().is_err());
    }

    #[test]
    fn short_grid_is_rejected() {
        assert!(rate_check(RateQuantity::SumPosUnit, &[100, 200], 10, 1, 0.15).is_err());
    }

    #[test]
    fn quick_random_walk_rate() {
        let r = rate_check(RateQuantity::SumPosUnit, &[128, 256, 512, 1024], 100, 5, 0.3).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r, rate_check(RateQuantity::SumPosUnit, &[128, 256, 512, 1024], 100, 5, 0.3).unwrap());
    }

    #[test]
    fn explosive_error_decays_fast() {
        let q = RateQuantity::EstErrorExplosive;
        let r = rate_check(q, &q.default_grid(), 50, 2, DEFAULT_RATE_TOLERANCE).unwrap();
        assert!(r.pass, "{r:?}");
    }
}
