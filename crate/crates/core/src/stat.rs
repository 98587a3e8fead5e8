//! Bickel-Rosenblatt statistics and their asymptotic moments.
//!
//! For residuals `ε̂_1..ε̂_n`, bandwidth `h` and weight `a`:
//!
//! * `T̂ₙ = n h ∫ (f̂ₙ - K_h * f)² a`, centred on the smoothed density;
//! * `T̃ₙ = n h ∫ (f̂ₙ - f)² a`, centred on the density itself.
//!
//! Under the null both satisfy `(Tₙ - μ)/√h → N(0, τ²)` with
//! `μ = ∫f a · ∫K²` and `τ² = 2 ∫f²a² · ∫(K⋆K)²`. With the truncated
//! reciprocal weight `a = 1/f₀ on [-δ, δ]` these collapse to `μ = 2δ∫K²` and
//! `τ² = 4δ∫(K⋆K)²`, free of the density.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimation::ResidualSet;
use crate::kde::{Kernel, KernelDensity, SmoothedTarget};
use crate::noise::NoiseSpec;
use crate::quadrature::{integrate_with_breaks, QuadConfig};

/// Envelope below which a generic weight is treated as zero.
pub const WEIGHT_ENVELOPE: f64 = 1e-12;

/// Relative accuracy of the statistic integrals.
pub const STAT_REL_TOL: f64 = 1e-9;

/// Weight function `a(x)` of the L² distance.
#[derive(Clone)]
pub enum WeightFn {
    /// `1/f₀(x)` on `[-δ, δ]`, zero outside.
    TruncatedReciprocal { f0: NoiseSpec, delta: f64 },
    /// Indicator of `[lo, hi]`.
    Indicator { lo: f64, hi: f64 },
    /// Any non-negative integrable weight; `support` is `None` for `a ≡ 0`.
    Generic {
        func: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        support: Option<(f64, f64)>,
    },
}

impl fmt::Debug for WeightFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightFn::TruncatedReciprocal { f0, delta } => {
                write!(f, "TruncatedReciprocal {{ f0: {f0}, delta: {delta} }}")
            }
            WeightFn::Indicator { lo, hi } => write!(f, "Indicator [{lo}, {hi}]"),
            WeightFn::Generic { support, .. } => write!(f, "Generic {{ support: {support:?} }}"),
        }
    }
}

impl WeightFn {
    pub fn truncated_reciprocal(f0: NoiseSpec, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(invalid(format!("delta must be positive, got {delta}")));
        }
        let f0 = f0.validated()?;
        // f0 must not vanish on [-δ, δ]; the catalogue densities are unimodal
        // or flat, so checking the end points and centre is enough.
        for x in [-delta, 0.0, delta] {
            if !(f0.density(x) > 0.0) {
                return Err(invalid(format!("{f0} vanishes at {x} inside [-{delta}, {delta}]")));
            }
        }
        Ok(WeightFn::TruncatedReciprocal { f0, delta })
    }

    pub fn indicator(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(invalid(format!("bad indicator interval [{lo}, {hi}]")));
        }
        Ok(WeightFn::Indicator { lo, hi })
    }

    pub fn zero() -> Self {
        WeightFn::Generic {
            func: Arc::new(|_| 0.0),
            support: None,
        }
    }

    /// Wraps a weight function, locating the interval where it exceeds
    /// [`WEIGHT_ENVELOPE`] by scanning `[-64, 64]` on a 1/256 grid.
    pub fn generic<F: Fn(f64) -> f64 + Send + Sync + 'static>(func: F) -> Self {
        let step = 1.0 / 256.0;
        let mut lo = None;
        let mut hi = None;
        let mut i = -64 * 256;
        while i <= 64 * 256 {
            let x = i as f64 * step;
            if func(x).abs() >= WEIGHT_ENVELOPE {
                if lo.is_none() {
                    lo = Some(x);
                }
                hi = Some(x);
            }
            i += 1;
        }
        let support = match (lo, hi) {
            (Some(l), Some(h)) => Some((l - step, h + step)),
            _ => None,
        };
        WeightFn::Generic {
            func: Arc::new(func),
            support,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            WeightFn::TruncatedReciprocal { f0, delta } => {
                if x.abs() <= *delta {
                    1.0 / f0.density(x)
                } else {
                    0.0
                }
            }
            WeightFn::Indicator { lo, hi } => {
                if x >= *lo && x <= *hi {
                    1.0
                } else {
                    0.0
                }
            }
            WeightFn::Generic { func, .. } => func(x),
        }
    }

    /// Integration domain, `None` when the weight vanishes everywhere.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self {
            WeightFn::TruncatedReciprocal { delta, .. } => Some((-delta, *delta)),
            WeightFn::Indicator { lo, hi } => Some((*lo, *hi)),
            WeightFn::Generic { support, .. } => *support,
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            WeightFn::TruncatedReciprocal { f0, .. } => f0.breakpoints(),
            _ => Vec::new(),
        }
    }
}

/// Sorted breakpoints for `[lo, hi]` with `extra` interior points and a
/// uniform pre-partition of the given spacing.
fn partition(lo: f64, hi: f64, extra: impl IntoIterator<Item = f64>, spacing: Option<f64>) -> Vec<f64> {
    let mut pts = vec![lo, hi];
    pts.extend(extra.into_iter().filter(|&p| p > lo && p < hi));
    if let Some(s) = spacing {
        let m = ((hi - lo) / s).ceil().min(100_000.0) as usize;
        for i in 1..m {
            pts.push(lo + (hi - lo) * i as f64 / m as f64);
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn weight_integral(f: &NoiseSpec, a: &WeightFn, power: i32, cfg: &QuadConfig) -> Result<f64> {
    let Some((lo, hi)) = a.support() else {
        return Ok(0.0);
    };
    let pts = partition(lo, hi, f.breakpoints().into_iter().chain(a.breakpoints()), None);
    let r = integrate_with_breaks(
        |x| (f.density(x) * a.eval(x)).powi(power),
        &pts,
        cfg,
    )?;
    Ok(r.value)
}

fn moment_cfg() -> QuadConfig {
    QuadConfig {
        rel_tol: 1e-12,
        abs_tol: 1e-15,
        ..QuadConfig::default()
    }
}

/// `μ = ∫ f a · ∫ K²`.
pub fn centering_mu(f: &NoiseSpec, a: &WeightFn, k: &Kernel) -> Result<f64> {
    let fa = weight_integral(f, a, 1, &moment_cfg())?;
    Ok(fa * k.functionals().l2)
}

/// `τ² = 2 ∫ f² a² · ∫ (K⋆K)²`.
pub fn variance_tau2(f: &NoiseSpec, a: &WeightFn, k: &Kernel) -> Result<f64> {
    let ffaa = weight_integral(f, a, 2, &moment_cfg())?;
    Ok(2.0 * ffaa * k.functionals().autoconv_l2)
}

/// `μ = 2δ ∫K²` for the truncated reciprocal weight.
pub fn truncated_mu(delta: f64, k: &Kernel) -> f64 {
    2.0 * delta * k.functionals().l2
}

/// `τ² = 4δ ∫(K⋆K)²` for the truncated reciprocal weight.
pub fn truncated_tau2(delta: f64, k: &Kernel) -> f64 {
    4.0 * delta * k.functionals().autoconv_l2
}

/// `z = (T - μ) / (√τ² √h)`.
pub fn standardize(value: f64, mu: f64, tau2: f64, h: f64) -> Result<f64> {
    if !(tau2 > 0.0) {
        return Err(Error::DegenerateVariance(tau2));
    }
    if !(h > 0.0) {
        return Err(invalid(format!("bandwidth must be positive, got {h}")));
    }
    Ok((value - mu) / (tau2.sqrt() * h.sqrt()))
}

/// Centre of the L² distance.
enum Target<'k> {
    Density(NoiseSpec),
    Smoothed(SmoothedTarget<'k>),
}

fn l2_statistic(res: &ResidualSet, k: &Kernel, h: f64, target: Target<'_>, target_f: &NoiseSpec, a: &WeightFn) -> Result<f64> {
    let kde = KernelDensity::from_residuals(res, k, h)?;
    let Some((lo, hi)) = a.support() else {
        return Ok(0.0);
    };
    let extra = kde
        .breakpoints()
        .into_iter()
        .chain(target_f.breakpoints())
        .chain(a.breakpoints());
    let pts = partition(lo, hi, extra, Some(h));
    let mut failure = None;
    let integrand = |x: f64| {
        let w = a.eval(x);
        if w == 0.0 {
            return 0.0;
        }
        let t = match &target {
            Target::Density(f) => f.density(x),
            Target::Smoothed(s) => match s.eval(x) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            },
        };
        let d = kde.eval(x) - t;
        d * d * w
    };
    let cfg = QuadConfig {
        rel_tol: STAT_REL_TOL,
        abs_tol: 1e-300,
        max_intervals: 200_000,
    };
    let r = integrate_with_breaks(integrand, &pts, &cfg)?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(res.len() as f64 * h * r.value)
}

/// `T̂ₙ = n h ∫ (f̂ₙ - K_h * f)² a`.
pub fn t_hat(res: &ResidualSet, k: &Kernel, h: f64, f: &NoiseSpec, a: &WeightFn) -> Result<f64> {
    let target = SmoothedTarget::new(k, h, *f)?;
    l2_statistic(res, k, h, Target::Smoothed(target), f, a)
}

/// `T̃ₙ = n h ∫ (f̂ₙ - f₀)² a`.
pub fn t_tilde(res: &ResidualSet, k: &Kernel, h: f64, f0: &NoiseSpec, a: &WeightFn) -> Result<f64> {
    let f0 = f0.validated()?;
    l2_statistic(res, k, h, Target::Density(f0), &f0, a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    THat,
    TTilde,
}

/// One evaluated statistic with its standardization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrReport {
    pub statistic_kind: StatisticKind,
    pub value: f64,
    pub mu: f64,
    pub tau2: f64,
    pub z: f64,
    pub n: usize,
    pub h: f64,
}

/// Evaluates a statistic and standardizes it with the generic μ and τ².
pub fn br_report(
    kind: StatisticKind,
    res: &ResidualSet,
    k: &Kernel,
    h: f64,
    f: &NoiseSpec,
    a: &WeightFn,
) -> Result<BrReport> {
    let value = match kind {
        StatisticKind::THat => t_hat(res, k, h, f, a)?,
        StatisticKind::TTilde => t_tilde(res, k, h, f, a)?,
    };
    let mu = centering_mu(f, a, k)?;
    let tau2 = variance_tau2(f, a, k)?;
    let z = standardize(value, mu, tau2, h)?;
    Ok(BrReport {
        statistic_kind: kind,
        value,
        mu,
        tau2,
        z,
        n: res.len(),
        h,
    })
}
