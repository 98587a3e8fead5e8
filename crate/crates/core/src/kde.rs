//! Kernels, bandwidths and the Parzen-Rosenblatt density estimator.
//!
//! Three kernels are provided:
//!
//! * `Gaussian`: the standard normal density.
//! * `SmoothedUniform { eps_s }`: a C² version of the uniform kernel on
//!   `[-1, 1]`. With `t = (|u| - (1 - eps_s)) / eps_s` and the quintic
//!   smoothstep `S(t) = 10t³ - 15t⁴ + 6t⁵`,
//!   `K(u) = c` for `|u| ≤ 1 - eps_s`, `K(u) = c (1 - S(t))` for
//!   `1 - eps_s < |u| < 1`, and `0` beyond. `S` has vanishing first and second
//!   derivatives at both ends, so `K` is twice continuously differentiable,
//!   and `∫K = 1` gives `c = 1 / (2 - eps_s)`.
//! * `Exponential`: the one-sided `K(u) = e^{-u}` for `u ≥ 0`. It is the only
//!   kernel here with `∫K′ ≠ 0` and exists for the random-walk experiments.
//!
//! Every kernel functional (`∫K`, `∫K²`, `∫(K⋆K)²`, `∫K′`, moments) is
//! computed by quadrature when the kernel is built and cached.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimation::ResidualSet;
use crate::noise::NoiseSpec;
use crate::quadrature::{integrate_real_line, integrate_upper, integrate_with_breaks, QuadConfig};
use crate::special;

/// Beyond this many standard deviations the Gaussian kernel is below 3e-18.
pub const GAUSSIAN_CUTOFF: f64 = 9.0;

/// Exponential kernel truncation, `e^{-40} ≈ 4e-18`.
pub const EXPONENTIAL_CUTOFF: f64 = 40.0;

pub const DEFAULT_TAPER: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelSpec {
    Gaussian,
    SmoothedUniform { eps_s: f64 },
    Exponential,
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Gaussian => f.write_str("gaussian"),
            KernelSpec::SmoothedUniform { eps_s } => write!(f, "uniform:{eps_s}"),
            KernelSpec::Exponential => f.write_str("exponential"),
        }
    }
}

/// `gaussian`, `uniform[:eps]`, `exponential`.
impl FromStr for KernelSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = s.split_once(':').unwrap_or((s, ""));
        match name.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(KernelSpec::Gaussian),
            "uniform" | "smoothed-uniform" => {
                let eps_s = if arg.is_empty() {
                    DEFAULT_TAPER
                } else {
                    arg.parse().map_err(|_| invalid(format!("bad taper width {arg:?}")))?
                };
                Ok(KernelSpec::SmoothedUniform { eps_s })
            }
            "exponential" | "exp" => Ok(KernelSpec::Exponential),
            other => Err(invalid(format!("unknown kernel {other:?}"))),
        }
    }
}

/// Integrals of a kernel, cached on construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelFunctionals {
    /// `∫K`.
    pub mass: f64,
    /// `∫K²`.
    pub l2: f64,
    /// `∫(∫K(t)K(t+s)dt)² ds`.
    pub autoconv_l2: f64,
    /// `∫K′` over the open support (jumps excluded).
    pub derivative_integral: f64,
    /// `∫sK(s)ds`.
    pub first_moment: f64,
    /// `∫s²K(s)ds`.
    pub second_moment: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    spec: KernelSpec,
    plateau: f64,
    functionals: KernelFunctionals,
}

fn smoothstep(t: f64) -> f64 {
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

fn smoothstep_deriv(t: f64) -> f64 {
    30.0 * t * t * (1.0 - t) * (1.0 - t)
}

impl Kernel {
    pub fn new(spec: KernelSpec) -> Result<Self> {
        let plateau = match spec {
            KernelSpec::SmoothedUniform { eps_s } => {
                if !(eps_s > 0.0 && eps_s < 0.5) {
                    return Err(invalid(format!("taper width must lie in (0, 1/2), got {eps_s}")));
                }
                1.0 / (2.0 - eps_s)
            }
            _ => 0.0,
        };
        let mut k = Kernel {
            spec,
            plateau,
            functionals: KernelFunctionals {
                mass: 0.0,
                l2: 0.0,
                autoconv_l2: 0.0,
                derivative_integral: 0.0,
                first_moment: 0.0,
                second_moment: 0.0,
            },
        };
        k.functionals = k.compute_functionals()?;
        Ok(k)
    }

    pub fn gaussian() -> Self {
        Self::new(KernelSpec::Gaussian).expect("gaussian kernel")
    }

    pub fn smoothed_uniform(eps_s: f64) -> Result<Self> {
        Self::new(KernelSpec::SmoothedUniform { eps_s })
    }

    pub fn exponential() -> Self {
        Self::new(KernelSpec::Exponential).expect("exponential kernel")
    }

    pub fn spec(&self) -> KernelSpec {
        self.spec
    }

    pub fn functionals(&self) -> &KernelFunctionals {
        &self.functionals
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match self.spec {
            KernelSpec::Gaussian => special::normal_pdf(u),
            KernelSpec::SmoothedUniform { eps_s } => {
                let a = u.abs();
                if a >= 1.0 {
                    0.0
                } else if a <= 1.0 - eps_s {
                    self.plateau
                } else {
                    self.plateau * (1.0 - smoothstep((a - (1.0 - eps_s)) / eps_s))
                }
            }
            KernelSpec::Exponential => {
                if u >= 0.0 {
                    (-u).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// Classical derivative `K′(u)`, zero at jump points.
    pub fn derivative(&self, u: f64) -> f64 {
        match self.spec {
            KernelSpec::Gaussian => -u * special::normal_pdf(u),
            KernelSpec::SmoothedUniform { eps_s } => {
                let a = u.abs();
                if a >= 1.0 || a <= 1.0 - eps_s {
                    0.0
                } else {
                    -u.signum() * self.plateau * smoothstep_deriv((a - (1.0 - eps_s)) / eps_s) / eps_s
                }
            }
            KernelSpec::Exponential => {
                if u > 0.0 {
                    -(-u).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// Interval outside which the kernel is zero or negligible.
    pub fn support(&self) -> (f64, f64) {
        match self.spec {
            KernelSpec::Gaussian => (-GAUSSIAN_CUTOFF, GAUSSIAN_CUTOFF),
            KernelSpec::SmoothedUniform { .. } => (-1.0, 1.0),
            KernelSpec::Exponential => (0.0, EXPONENTIAL_CUTOFF),
        }
    }

    /// Points where the kernel or one of its low derivatives jumps.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.spec {
            KernelSpec::Gaussian => Vec::new(),
            KernelSpec::SmoothedUniform { eps_s } => vec![-1.0, -(1.0 - eps_s), 1.0 - eps_s, 1.0],
            KernelSpec::Exponential => vec![0.0],
        }
    }

    pub fn is_even(&self) -> bool {
        !matches!(self.spec, KernelSpec::Exponential)
    }

    /// `(K⋆K)(s) = ∫K(t)K(t+s)dt`.
    pub fn autoconvolution(&self, s: f64, cfg: &QuadConfig) -> Result<f64> {
        match self.spec {
            KernelSpec::Gaussian => {
                integrate_real_line(|t| self.eval(t) * self.eval(t + s), cfg).map(|r| r.value)
            }
            KernelSpec::SmoothedUniform { .. } => {
                let lo = (-1.0f64).max(-1.0 - s);
                let hi = 1.0f64.min(1.0 - s);
                if hi <= lo {
                    return Ok(0.0);
                }
                let mut pts = vec![lo, hi];
                for b in self.breakpoints() {
                    for c in [b, b - s] {
                        if c > lo && c < hi {
                            pts.push(c);
                        }
                    }
                }
                pts.sort_by(f64::total_cmp);
                integrate_with_breaks(|t| self.eval(t) * self.eval(t + s), &pts, cfg).map(|r| r.value)
            }
            KernelSpec::Exponential => {
                integrate_upper(|t| self.eval(t) * self.eval(t + s), 0.0f64.max(-s), cfg).map(|r| r.value)
            }
        }
    }

    fn integrate_kernel<F: FnMut(f64) -> f64>(&self, f: F, cfg: &QuadConfig) -> Result<f64> {
        match self.spec {
            KernelSpec::Gaussian => integrate_real_line(f, cfg).map(|r| r.value),
            KernelSpec::SmoothedUniform { .. } => {
                integrate_with_breaks(f, &self.breakpoints(), cfg).map(|r| r.value)
            }
            KernelSpec::Exponential => integrate_upper(f, 0.0, cfg).map(|r| r.value),
        }
    }

    fn compute_functionals(&self) -> Result<KernelFunctionals> {
        let cfg = QuadConfig {
            rel_tol: 1e-12,
            abs_tol: 1e-15,
            ..QuadConfig::default()
        };
        let mass = self.integrate_kernel(|u| self.eval(u), &cfg)?;
        let l2 = self.integrate_kernel(|u| self.eval(u).powi(2), &cfg)?;
        let derivative_integral = self.integrate_kernel(|u| self.derivative(u), &cfg)?;
        let first_moment = self.integrate_kernel(|u| u * self.eval(u), &cfg)?;
        let second_moment = self.integrate_kernel(|u| u * u * self.eval(u), &cfg)?;

        let inner = QuadConfig {
            rel_tol: 1e-13,
            abs_tol: 1e-16,
            ..QuadConfig::default()
        };
        let mut failure = None;
        let mut sq = |s: f64| match self.autoconvolution(s, &inner) {
            Ok(v) => v * v,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        };
        let autoconv_l2 = match self.spec {
            KernelSpec::Gaussian => integrate_real_line(&mut sq, &cfg)?.value,
            KernelSpec::SmoothedUniform { eps_s } => {
                let e = eps_s;
                let mut pts: Vec<f64> = vec![-2.0, -2.0 + e, -2.0 + 2.0 * e, -e, 0.0, e, 2.0 - 2.0 * e, 2.0 - e, 2.0];
                pts.sort_by(f64::total_cmp);
                pts.dedup();
                integrate_with_breaks(&mut sq, &pts, &cfg)?.value
            }
            KernelSpec::Exponential => {
                // Even in s; integrate the right half twice.
                2.0 * integrate_upper(&mut sq, 0.0, &cfg)?.value
            }
        };
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(KernelFunctionals {
            mass,
            l2,
            autoconv_l2,
            derivative_integral,
            first_moment,
            second_moment,
        })
    }
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::gaussian()
    }
}

/// Bandwidth schedule `h(n) = h0 · n^{-κ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bandwidth {
    pub h0: f64,
    pub kappa: f64,
}

impl Bandwidth {
    pub fn new(h0: f64, kappa: f64) -> Result<Self> {
        if !(h0 > 0.0 && h0.is_finite()) {
            return Err(invalid(format!("h0 must be positive, got {h0}")));
        }
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(invalid(format!("kappa must be non-negative, got {kappa}")));
        }
        Ok(Self { h0, kappa })
    }

    /// `h0 · n^{-(1/4 - eps)}`.
    pub fn quarter_minus(h0: f64, eps: f64) -> Result<Self> {
        Self::new(h0, 0.25 - eps)
    }

    pub fn at(&self, n: usize) -> f64 {
        self.h0 * (n.max(1) as f64).powf(-self.kappa)
    }

    /// Checks `lo < κ < hi`, e.g. `(2/9, 1/4)` for the stable-regime limit.
    pub fn require_kappa_in(&self, lo: f64, hi: f64) -> Result<()> {
        if self.kappa > lo && self.kappa < hi {
            Ok(())
        } else {
            Err(invalid(format!("kappa {} outside ({lo}, {hi})", self.kappa)))
        }
    }
}

pub fn bandwidth_at(b: &Bandwidth, n: usize) -> f64 {
    b.at(n)
}

/// Parzen-Rosenblatt estimate built on sorted residuals.
///
/// Only residuals within the kernel's support window around `x` are summed,
/// located by binary search.
#[derive(Debug, Clone)]
pub struct KernelDensity<'k> {
    sorted: Vec<f64>,
    kernel: &'k Kernel,
    h: f64,
    norm: f64,
    /// For the one-sided exponential kernel, `S_k = Σ_{i≤k} exp(-(e_k - e_i)/h)`,
    /// so that `f̂(x) = norm · exp(-(x - e_k)/h) · S_k` with `e_k` the last
    /// residual not above `x`.
    exp_prefix: Option<Vec<f64>>,
}

impl<'k> KernelDensity<'k> {
    pub fn new(residuals: &[f64], kernel: &'k Kernel, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid(format!("bandwidth must be positive, got {h}")));
        }
        if residuals.is_empty() {
            return Err(Error::Shape("no residuals".into()));
        }
        let mut sorted = residuals.to_vec();
        sorted.sort_by(f64::total_cmp);
        let norm = 1.0 / (sorted.len() as f64 * h);
        let exp_prefix = matches!(kernel.spec(), KernelSpec::Exponential).then(|| {
            let mut acc = Vec::with_capacity(sorted.len());
            let mut s = 0.0;
            for (i, &e) in sorted.iter().enumerate() {
                if i > 0 {
                    s *= (-(e - sorted[i - 1]) / h).exp();
                }
                s += 1.0;
                acc.push(s);
            }
            acc
        });
        Ok(Self {
            sorted,
            kernel,
            h,
            norm,
            exp_prefix,
        })
    }

    pub fn from_residuals(res: &ResidualSet, kernel: &'k Kernel, h: f64) -> Result<Self> {
        Self::new(res.values(), kernel, h)
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn kernel(&self) -> &Kernel {
        self.kernel
    }

    pub fn sorted_residuals(&self) -> &[f64] {
        &self.sorted
    }

    pub fn eval(&self, x: f64) -> f64 {
        if let Some(prefix) = &self.exp_prefix {
            let k = self.sorted.partition_point(|&e| e <= x);
            return if k == 0 {
                0.0
            } else {
                self.norm * (-(x - self.sorted[k - 1]) / self.h).exp() * prefix[k - 1]
            };
        }
        let (lo, hi) = self.kernel.support();
        // K((x - e)/h) ≠ 0 needs x - hi·h ≤ e ≤ x - lo·h.
        let from = self.sorted.partition_point(|&e| e < x - hi * self.h);
        let to = self.sorted.partition_point(|&e| e <= x - lo * self.h);
        let inv_h = 1.0 / self.h;
        let mut s = 0.0;
        for &e in &self.sorted[from..to.max(from)] {
            s += self.kernel.eval((x - e) * inv_h);
        }
        s * self.norm
    }

    /// Points in `x` where the estimate is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        let kb = self.kernel.breakpoints();
        if kb.is_empty() {
            return Vec::new();
        }
        let mut pts = Vec::with_capacity(kb.len() * self.sorted.len());
        for &e in &self.sorted {
            for &b in &kb {
                pts.push(e + b * self.h);
            }
        }
        pts.sort_by(f64::total_cmp);
        pts
    }
}

/// `f̂ₙ(x) = (n h)⁻¹ Σ K((x - ε̂_t)/h)`.
pub fn pr_density(res: &ResidualSet, k: &Kernel, h: f64, x: f64) -> Result<f64> {
    Ok(KernelDensity::from_residuals(res, k, h)?.eval(x))
}

/// The smoothed density `K_h * f`.
#[derive(Debug, Clone)]
pub struct SmoothedTarget<'k> {
    kernel: &'k Kernel,
    h: f64,
    f: NoiseSpec,
    cfg: QuadConfig,
}

impl<'k> SmoothedTarget<'k> {
    pub fn new(kernel: &'k Kernel, h: f64, f: NoiseSpec) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid(format!("bandwidth must be positive, got {h}")));
        }
        Ok(Self {
            kernel,
            h,
            f: f.validated()?,
            cfg: QuadConfig {
                rel_tol: 1e-11,
                abs_tol: 1e-15,
                ..QuadConfig::default()
            },
        })
    }

    /// Closed forms where they exist.
    fn closed_form(&self, x: f64) -> Option<f64> {
        match (self.kernel.spec(), self.f) {
            (KernelSpec::Gaussian, NoiseSpec::Normal { mean, var }) => {
                let sd = (var + self.h * self.h).sqrt();
                Some(special::normal_pdf((x - mean) / sd) / sd)
            }
            (KernelSpec::Exponential, NoiseSpec::Normal { mean, var }) => {
                let sd = var.sqrt();
                let z = (x - mean) / sd;
                let lambda = sd / self.h;
                Some(special::normal_pdf(z) * special::mills_ratio(lambda - z) / self.h)
            }
            _ => None,
        }
    }

    /// `∫K(u) f(x - h u) du` by quadrature.
    pub fn eval_quadrature(&self, x: f64) -> Result<f64> {
        let g = |u: f64| self.kernel.eval(u) * self.f.density(x - self.h * u);
        let mut pts = self.kernel.breakpoints();
        for b in self.f.breakpoints() {
            pts.push((x - b) / self.h);
        }
        match self.kernel.spec() {
            KernelSpec::Gaussian => {
                if pts.is_empty() {
                    integrate_real_line(g, &self.cfg).map(|r| r.value)
                } else {
                    // Split the line at the density's kinks.
                    pts.sort_by(f64::total_cmp);
                    let inner = if pts.len() > 1 {
                        integrate_with_breaks(g, &pts, &self.cfg)?.value
                    } else {
                        0.0
                    };
                    let lower = crate::quadrature::integrate_lower(g, pts[0], &self.cfg)?.value;
                    let upper = integrate_upper(g, pts[pts.len() - 1], &self.cfg)?.value;
                    Ok(lower + inner + upper)
                }
            }
            KernelSpec::SmoothedUniform { .. } => {
                pts.retain(|&p| (-1.0..=1.0).contains(&p));
                pts.push(-1.0);
                pts.push(1.0);
                pts.sort_by(f64::total_cmp);
                integrate_with_breaks(g, &pts, &self.cfg).map(|r| r.value)
            }
            KernelSpec::Exponential => {
                pts.retain(|&p| p > 0.0);
                if pts.is_empty() {
                    integrate_upper(g, 0.0, &self.cfg).map(|r| r.value)
                } else {
                    pts.push(0.0);
                    pts.sort_by(f64::total_cmp);
                    let last = pts[pts.len() - 1];
                    Ok(integrate_with_breaks(g, &pts, &self.cfg)?.value
                        + integrate_upper(g, last, &self.cfg)?.value)
                }
            }
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        match self.closed_form(x) {
            Some(v) => Ok(v),
            None => self.eval_quadrature(x),
        }
    }
}

/// `x ↦ (K_h * f)(x)`.
pub fn smoothed_target<'k>(k: &'k Kernel, h: f64, f: NoiseSpec) -> Result<SmoothedTarget<'k>> {
    SmoothedTarget::new(k, h, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn bandwidth_schedule() {
        assert_eq!(Bandwidth::new(0.14, 0.0).unwrap().at(100), 0.14);
        assert!((Bandwidth::new(1.0, 0.25).unwrap().at(16) - 0.5).abs() < 1e-15);
        // 0.2 · 10^{-0.92}
        let h = Bandwidth::new(0.2, 0.23).unwrap().at(10_000);
        assert!((h - 0.024_045_2).abs() < 1e-6, "{h}");
        let b = Bandwidth::quarter_minus(0.14, 0.02).unwrap();
        assert!((b.kappa - 0.23).abs() < 1e-15);
        assert!(b.require_kappa_in(2.0 / 9.0, 0.25).is_ok());
        assert!(Bandwidth::new(0.1, 0.2).unwrap().require_kappa_in(2.0 / 9.0, 0.25).is_err());
        assert!(Bandwidth::new(0.0, 0.2).is_err());
        assert!(b.at(200) < b.at(100));
    }

    #[test]
    fn kernels_are_normalized() {
        for k in [Kernel::gaussian(), Kernel::smoothed_uniform(0.05).unwrap(), Kernel::smoothed_uniform(0.3).unwrap(), Kernel::exponential()] {
            assert!((k.functionals().mass - 1.0).abs() < 1e-8, "{:?}", k.spec());
        }
    }

    #[test]
    fn gaussian_functionals_match_closed_forms() {
        let f = *Kernel::gaussian().functionals();
        assert!((f.l2 - 1.0 / (2.0 * PI.sqrt())).abs() < 1e-8);
        assert!((f.autoconv_l2 - 1.0 / (2.0 * (2.0 * PI).sqrt())).abs() < 1e-8);
        assert!(f.derivative_integral.abs() < 1e-10);
        assert!(f.first_moment.abs() < 1e-10);
        assert!((f.second_moment - 1.0).abs() < 1e-8);
    }

    #[test]
    fn exponential_functionals() {
        let f = *Kernel::exponential().functionals();
        assert!((f.l2 - 0.5).abs() < 1e-8);
        assert!((f.autoconv_l2 - 0.25).abs() < 1e-8);
        assert!((f.derivative_integral + 1.0).abs() < 1e-8);
        assert!((f.first_moment - 1.0).abs() < 1e-8);
    }

    #[test]
    fn smoothed_uniform_shape() {
        let k = Kernel::smoothed_uniform(0.05).unwrap();
        let c = k.eval(0.0);
        assert!((0.45..=0.55).contains(&c));
        assert_eq!(k.eval(1.0), 0.0);
        assert_eq!(k.eval(-1.0), 0.0);
        assert_eq!(k.eval(0.3), k.eval(-0.3));
        assert!(k.functionals().derivative_integral.abs() < 1e-10);
        // Continuity of K and K′ across the taper ends.
        for u in [0.95, 1.0] {
            assert!((k.eval(u - 1e-9) - k.eval(u + 1e-9)).abs() < 1e-7);
            assert!((k.derivative(u - 1e-9) - k.derivative(u + 1e-9)).abs() < 1e-6);
        }
        assert!(Kernel::smoothed_uniform(0.5).is_err());
        assert!(Kernel::smoothed_uniform(0.0).is_err());
    }

    #[test]
    fn derivative_matches_finite_differences() {
        for k in [Kernel::gaussian(), Kernel::smoothed_uniform(0.2).unwrap(), Kernel::exponential()] {
            for &u in &[-0.9, -0.5, 0.3, 0.85, 0.97, 1.4] {
                let d = 1e-6;
                let fd = (k.eval(u + d) - k.eval(u - d)) / (2.0 * d);
                assert!((fd - k.derivative(u)).abs() < 1e-6, "{:?} u={u}", k.spec());
            }
        }
    }

    #[test]
    fn single_residual_density() {
        let res = ResidualSet::new(vec![0.0]).unwrap();
        let v = pr_density(&res, &Kernel::gaussian(), 1.0, 0.0).unwrap();
        assert!((v - 0.398_942_3).abs() < 1e-7);
        assert!(pr_density(&res, &Kernel::gaussian(), 0.0, 0.0).is_err());
    }

    #[test]
    fn windowed_sum_matches_full_sum() {
        let res: Vec<f64> = (0..50).map(|i| ((i * 7919) % 101) as f64 / 25.0 - 2.0).collect();
        for k in [Kernel::gaussian(), Kernel::smoothed_uniform(0.05).unwrap(), Kernel::exponential()] {
            let h = 0.13;
            let kd = KernelDensity::new(&res, &k, h).unwrap();
            for i in -30..30 {
                let x = i as f64 * 0.1;
                let full: f64 = res.iter().map(|e| k.eval((x - e) / h)).sum::<f64>() / (50.0 * h);
                assert!((kd.eval(x) - full).abs() < 1e-13 * full.max(1e-2), "{:?} x={x}", k.spec());
            }
        }
    }

    #[test]
    fn smoothed_target_closed_forms() {
        let k = Kernel::gaussian();
        let t = smoothed_target(&k, 0.5, NoiseSpec::STANDARD_NORMAL).unwrap();
        let v = t.eval(0.0).unwrap();
        assert!((v - 1.0 / (2.0 * PI * 1.25).sqrt()).abs() < 1e-12);
        assert!((v - 0.356_825).abs() < 1e-6);
        for x in [-2.0, -0.3, 0.0, 1.7] {
            assert!((t.eval(x).unwrap() - t.eval_quadrature(x).unwrap()).abs() < 1e-10);
        }
        let tiny = smoothed_target(&k, 1e-6, NoiseSpec::STANDARD_NORMAL).unwrap();
        assert!((tiny.eval(0.0).unwrap() - special::normal_pdf(0.0)).abs() < 1e-4);

        let e = Kernel::exponential();
        for h in [0.5, 0.05, 0.01] {
            let t = smoothed_target(&e, h, NoiseSpec::Normal { mean: 0.3, var: 2.0 }).unwrap();
            for x in [-2.0, 0.0, 0.4, 2.0] {
                let a = t.eval(x).unwrap();
                let b = t.eval_quadrature(x).unwrap();
                assert!((a - b).abs() < 1e-9 * b.max(1e-3), "h={h} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn smoothed_laplace_matches_riemann_sum() {
        let k = Kernel::gaussian();
        let f = NoiseSpec::Laplace { b: 1.0 };
        let t = smoothed_target(&k, 0.3, f).unwrap();
        // Midpoint sum of K_h(x - u) f(u) over [-12, 12], step 1e-4.
        let step = 1e-4;
        let mut s = 0.0;
        let mut u = -12.0 + 0.5 * step;
        while u < 12.0 {
            s += special::normal_pdf((0.0 - u) / 0.3) / 0.3 * f.density(u);
            u += step;
        }
        s *= step;
        assert!((t.eval(0.0).unwrap() - s).abs() < 1e-7, "{} vs {s}", t.eval(0.0).unwrap());
    }

    #[test]
    fn smoothed_targets_integrate_to_one() {
        let cfg = QuadConfig::with_rel_tol(1e-9);
        let k = Kernel::gaussian();
        let u = Kernel::smoothed_uniform(0.05).unwrap();
        for f in [
            NoiseSpec::STANDARD_NORMAL,
            NoiseSpec::Laplace { b: 1.0 },
            NoiseSpec::Uniform { a: 2.0 },
            NoiseSpec::Student { nu: 5.0 },
        ] {
            for kern in [&k, &u] {
                let t = smoothed_target(kern, 0.4, f).unwrap();
                let total = integrate_real_line(|x| t.eval(x).unwrap(), &cfg).unwrap().value;
                assert!((total - 1.0).abs() < 1e-6, "{f} {:?}: {total}", kern.spec());
            }
        }
    }

    #[test]
    fn kernel_spec_parsing() {
        assert_eq!("gaussian".parse::<KernelSpec>().unwrap(), KernelSpec::Gaussian);
        assert_eq!("uniform".parse::<KernelSpec>().unwrap(), KernelSpec::SmoothedUniform { eps_s: 0.05 });
        assert_eq!("uniform:0.1".parse::<KernelSpec>().unwrap(), KernelSpec::SmoothedUniform { eps_s: 0.1 });
        assert!("epanechnikov".parse::<KernelSpec>().is_err());
    }
}
