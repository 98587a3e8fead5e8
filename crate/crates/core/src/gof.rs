//! Goodness-of-fit decision for the residual density.
//!
//! The null `H₀: Δ_δ(f, f₀) = 0` is tested with `T̃ₙ` under the truncated
//! reciprocal weight `a = 1/f₀ on [-δ, δ]`, so that `μ = 2δ∫K²` and
//! `τ² = 4δ∫(K⋆K)²` do not depend on `f₀`. `H₀` is rejected when
//! `z > u_{1-α}`, with `u` from [`normal_quantile`] (AS241, relative error
//! about 1e-16).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimation::ResidualSet;
use crate::kde::{Bandwidth, Kernel, KernelSpec};
use crate::noise::NoiseSpec;
use crate::quadrature::{integrate_with_breaks, QuadConfig};
use crate::rng::stream;
use crate::special::{kolmogorov_sf, normal_quantile, normal_sf};
use crate::stat::{standardize, t_tilde, truncated_mu, truncated_tau2, BrReport, StatisticKind, WeightFn};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestConfig {
    pub delta: f64,
    pub alpha: f64,
    pub kernel: KernelSpec,
    pub bandwidth: Bandwidth,
    pub f0: NoiseSpec,
    /// Also run the one-sample KS test of the residuals against `f₀`.
    #[serde(default)]
    pub ks_baseline: bool,
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Bandwidth::new(self.bandwidth.h0, self.bandwidth.kappa)?;
        WeightFn::truncated_reciprocal(self.f0, self.delta)?;
        Kernel::new(self.kernel)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub d: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub br: BrReport,
    pub reject: bool,
    pub p_value: f64,
    pub critical_value: f64,
    pub baseline_ks: Option<KsResult>,
}

/// A validated configuration with the kernel functionals and critical value
/// computed once, for repeated use across replications.
#[derive(Debug, Clone)]
pub struct GofTest {
    cfg: TestConfig,
    kernel: Kernel,
    weight: WeightFn,
    mu: f64,
    tau2: f64,
    critical: f64,
}

impl GofTest {
    pub fn new(cfg: &TestConfig) -> Result<Self> {
        cfg.validate()?;
        let kernel = Kernel::new(cfg.kernel)?;
        let weight = WeightFn::truncated_reciprocal(cfg.f0, cfg.delta)?;
        let mu = truncated_mu(cfg.delta, &kernel);
        let tau2 = truncated_tau2(cfg.delta, &kernel);
        Ok(Self {
            cfg: *cfg,
            kernel,
            weight,
            mu,
            tau2,
            critical: normal_quantile(1.0 - cfg.alpha),
        })
    }

    pub fn config(&self) -> &TestConfig {
        &self.cfg
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn tau2(&self) -> f64 {
        self.tau2
    }

    pub fn critical_value(&self) -> f64 {
        self.critical
    }

    pub fn run(&self, res: &ResidualSet) -> Result<TestReport> {
        let h = self.cfg.bandwidth.at(res.len());
        let value = t_tilde(res, &self.kernel, h, &self.cfg.f0, &self.weight)?;
        let z = standardize(value, self.mu, self.tau2, h)?;
        let br = BrReport {
            statistic_kind: StatisticKind::TTilde,
            value,
            mu: self.mu,
            tau2: self.tau2,
            z,
            n: res.len(),
            h,
        };
        let f0 = self.cfg.f0;
        let baseline_ks = self
            .cfg
            .ks_baseline
            .then(|| ks_test(res.values(), |x| f0.cdf(x)))
            .transpose()?;
        Ok(TestReport {
            br,
            reject: z > self.critical,
            p_value: normal_sf(z),
            critical_value: self.critical,
            baseline_ks,
        })
    }
}

pub fn br_gof_test(res: &ResidualSet, cfg: &TestConfig) -> Result<TestReport> {
    GofTest::new(cfg)?.run(res)
}

/// `Δ_δ(f, f₀) = ∫_{-δ}^{δ} (f - f₀)²/f₀`.
pub fn delta_distance(f: &NoiseSpec, f0: &NoiseSpec, delta: f64) -> Result<f64> {
    let f = f.validated()?;
    let weight = WeightFn::truncated_reciprocal(*f0, delta)?;
    let mut pts = vec![-delta, delta];
    pts.extend(f.breakpoints().into_iter().chain(f0.breakpoints()).filter(|p| p.abs() < delta));
    let cfg = QuadConfig {
        rel_tol: 1e-12,
        abs_tol: 1e-300,
        ..QuadConfig::default()
    };
    let r = integrate_with_breaks(
        |x| {
            let d = f.density(x) - f0.density(x);
            d * d * weight.eval(x)
        },
        &pts,
        &cfg,
    )?;
    Ok(r.value.max(0.0))
}

/// One-sample Kolmogorov-Smirnov test with the asymptotic p-value
/// `P(K > √n Dₙ)`.
pub fn ks_test<F: Fn(f64) -> f64>(sample: &[f64], cdf0: F) -> Result<KsResult> {
    if sample.is_empty() {
        return Err(invalid("KS test needs a non-empty sample"));
    }
    if sample.iter().any(|x| x.is_nan()) {
        return Err(invalid("KS sample contains NaN"));
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf0(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(KsResult {
        d,
        p: kolmogorov_sf(n.sqrt() * d),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WienerQuantiles {
    pub reps: usize,
    pub steps: usize,
    pub seed: u64,
    pub q90: f64,
    pub q95: f64,
    pub q99: f64,
}

impl WienerQuantiles {
    pub fn at(&self, level: f64) -> Option<f64> {
        match level {
            l if l == 0.90 => Some(self.q90),
            l if l == 0.95 => Some(self.q95),
            l if l == 0.99 => Some(self.q99),
            _ => None,
        }
    }
}

pub const WIENER_DEFAULT_STEPS: usize = 4096;

/// `Z = ((W(1)² - 1)/2 / ∫W² · ∫W)²` on one random-walk path.
pub fn wiener_functional_path(seed: u64, path: u64, steps: usize) -> f64 {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = stream(seed, path, 0);
    let scale = 1.0 / (steps as f64).sqrt();
    let dt = 1.0 / steps as f64;
    let (mut w, mut int_w, mut int_w2) = (0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..steps {
        let z: f64 = StandardNormal.sample(&mut rng);
        let next = w + z * scale;
        int_w += 0.5 * (w + next) * dt;
        int_w2 += 0.5 * (w * w + next * next) * dt;
        w = next;
    }
    let r = 0.5 * (w * w - 1.0) / int_w2 * int_w;
    r * r
}

/// Monte Carlo quantiles `{0.90, 0.95, 0.99}` of the Wiener functional.
/// Each path has its own derived stream, so the result does not depend on
/// how paths are scheduled.
pub fn wiener_functional_quantiles(reps: usize, steps: usize, seed: u64) -> Result<WienerQuantiles> {
    if reps < 10_000 {
        return Err(invalid(format!("need at least 10000 paths, got {reps}")));
    }
    if steps < 1000 {
        return Err(invalid(format!("need at least 1000 steps, got {steps}")));
    }
    let mut z = wiener_samples(reps, steps, seed);
    z.sort_by(f64::total_cmp);
    Ok(WienerQuantiles {
        reps,
        steps,
        seed,
        q90: empirical_quantile(&z, 0.90),
        q95: empirical_quantile(&z, 0.95),
        q99: empirical_quantile(&z, 0.99),
    })
}

#[cfg(feature = "parallel")]
fn wiener_samples(reps: usize, steps: usize, seed: u64) -> Vec<f64> {
    use rayon::prelude::*;
    (0..reps as u64)
        .into_par_iter()
        .map(|i| wiener_functional_path(seed, i, steps))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn wiener_samples(reps: usize, steps: usize, seed: u64) -> Vec<f64> {
    (0..reps as u64).map(|i| wiener_functional_path(seed, i, steps)).collect()
}

/// Linear-interpolation quantile of sorted data.
pub fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < n {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[n - 1]
    }
}

/// Normalizing constants of the random-walk variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RwConstants {
    /// `σ₀`, the standard deviation of `f₀` around its mean.
    pub sigma0: f64,
    /// `F₀ = ∫_{-δ}^{δ} f₀`.
    pub f0_mass: f64,
    /// `∫K′`.
    pub kernel_derivative: f64,
}

pub fn rw_constants(f0: &NoiseSpec, delta: f64, k: &Kernel) -> Result<RwConstants> {
    let kd = k.functionals().derivative_integral;
    if kd.abs() < 1e-10 {
        return Err(Error::InapplicableKernel(format!(
            "{} has ∫K′ = 0; the random-walk variant needs an asymmetric kernel",
            k.spec()
        )));
    }
    let var = f0
        .variance()
        .ok_or_else(|| invalid(format!("{f0} has infinite variance")))?;
    if !(delta > 0.0) {
        return Err(invalid(format!("delta must be positive, got {delta}")));
    }
    Ok(RwConstants {
        sigma0: var.sqrt(),
        f0_mass: f0.cdf(delta) - f0.cdf(-delta),
        kernel_derivative: kd,
    })
}

/// Experimental statistic `h(T̃ - μ) / (σ₀ √F₀ ∫K′)` for a random-walk
/// model, to be compared with quantiles of the Wiener functional.
pub fn rw_variant_statistic(t_tilde0: f64, mu: f64, h: f64, f0: &NoiseSpec, delta: f64, k: &Kernel) -> Result<f64> {
    let c = rw_constants(f0, delta, k)?;
    Ok(h * (t_tilde0 - mu) / (c.sigma0 * c.f0_mass.sqrt() * c.kernel_derivative))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> TestConfig {
        TestConfig {
            delta: 2.0,
            alpha: 0.05,
            kernel: KernelSpec::Gaussian,
            bandwidth: Bandwidth::new(0.14, 0.23).unwrap(),
            f0: NoiseSpec::STANDARD_NORMAL,
            ks_baseline: true,
        }
    }

    #[test]
    fn distance_zero_for_equal_densities() {
        let f = NoiseSpec::STANDARD_NORMAL;
        assert_eq!(delta_distance(&f, &f, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn distance_symmetric_in_mean_shift() {
        let f0 = NoiseSpec::STANDARD_NORMAL;
        let a = delta_distance(&NoiseSpec::normal(0.5, 1.0).unwrap(), &f0, 2.0).unwrap();
        let b = delta_distance(&NoiseSpec::normal(-0.5, 1.0).unwrap(), &f0, 2.0).unwrap();
        assert!(a > 0.0);
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn distance_rejects_vanishing_f0() {
        let f0 = NoiseSpec::Uniform { a: 1.0 };
        assert!(delta_distance(&NoiseSpec::STANDARD_NORMAL, &f0, 2.0).is_err());
    }

    #[test]
    fn ks_single_point() {
        let r = ks_test(&[0.0], |x| NoiseSpec::STANDARD_NORMAL.cdf(x)).unwrap();
        assert!((r.d - 0.5).abs() < 1e-15);
        assert!(ks_test(&[], |x| x).is_err());
    }

    #[test]
    fn ks_exact_quantiles() {
        let n = 40;
        let s: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect();
        let r = ks_test(&s, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!((r.d - 0.5 / n as f64).abs() < 1e-15);
    }

    #[test]
    fn rejection_is_strict() {
        let t = GofTest::new(&cfg()).unwrap();
        // Construct residuals, then ask whether z equal to u would reject.
        let z = t.critical_value();
        assert!(!(z > t.critical_value()));
        assert!((normal_sf(z) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn report_consistency() {
        let t = GofTest::new(&cfg()).unwrap();
        let res = ResidualSet::new((0..50).map(|i| ((i * 37 % 50) as f64 - 24.5) / 15.0).collect()).unwrap();
        let r = t.run(&res).unwrap();
        assert_eq!(r.reject, r.br.z > r.critical_value);
        assert_eq!(r.reject, r.p_value < 0.05);
        assert!((0.0..=1.0).contains(&r.p_value));
        assert!(r.baseline_ks.is_some());
        assert_eq!(r, br_gof_test(&res, &cfg()).unwrap());
    }

    #[test]
    fn config_validation() {
        let mut c = cfg();
        c.alpha = 1.0;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.f0 = NoiseSpec::Uniform { a: 1.0 };
        assert!(GofTest::new(&c).is_err());
        let json = r#"{"delta":2,"alpha":0.05,"kernel":{"kind":"gaussian"},"bandwidth":{"h0":0.14,"kappa":0.23},"f0":{"family":"normal","mean":0,"var":1},"extra":1}"#;
        assert!(serde_json::from_str::<TestConfig>(json).is_err());
    }

    #[test]
    fn rw_constants_for_standard_normal() {
        let k = Kernel::exponential();
        let c = rw_constants(&NoiseSpec::STANDARD_NORMAL, 2.0, &k).unwrap();
        assert!((c.sigma0 - 1.0).abs() < 1e-15);
        assert!((c.f0_mass - 0.954_499_736_103_641_6).abs() < 1e-12);
        assert_eq!(rw_variant_statistic(1.3, 1.3, 0.1, &NoiseSpec::STANDARD_NORMAL, 2.0, &k).unwrap(), 0.0);
    }

    #[test]
    fn rw_variant_preconditions() {
        let g = Kernel::gaussian();
        assert!(matches!(
            rw_variant_statistic(1.0, 0.0, 0.1, &NoiseSpec::STANDARD_NORMAL, 2.0, &g),
            Err(Error::InapplicableKernel(_))
        ));
        let k = Kernel::exponential();
        assert!(rw_variant_statistic(1.0, 0.0, 0.1, &NoiseSpec::Cauchy { scale: 1.0 }, 2.0, &k).is_err());
    }

    #[test]
    fn rw_sigma_is_mean_adjusted() {
        let k = Kernel::exponential();
        let c = rw_constants(&NoiseSpec::normal(3.0, 4.0).unwrap(), 2.0, &k).unwrap();
        assert!((c.sigma0 - 2.0).abs() < 1e-15);
    }

    #[test]
    fn wiener_quantiles_monotone_and_deterministic() {
        let q = wiener_functional_quantiles(10_000, 1000, 3).unwrap();
        assert!(q.q90 >= 0.0 && q.q90 <= q.q95 && q.q95 <= q.q99);
        assert_eq!(q, wiener_functional_quantiles(10_000, 1000, 3).unwrap());
        assert!(wiener_functional_quantiles(100, 1000, 3).is_err());
        for i in 0..50 {
            assert!(wiener_functional_path(9, i, 1000) >= 0.0);
        }
    }

    #[test]
    fn quantile_interpolation() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(empirical_quantile(&v, 0.5), 3.0);
        assert_eq!(empirical_quantile(&v, 0.0), 1.0);
        assert_eq!(empirical_quantile(&v, 1.0), 5.0);
        assert!((empirical_quantile(&v, 0.9) - 4.6).abs() < 1e-12);
    }
}
