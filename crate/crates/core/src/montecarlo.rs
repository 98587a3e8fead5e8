//! Replicated simulate → fit → test pipelines: empirical level and power,
//! bandwidth calibration.
//!
//! Replication `r`, attempt `k` draws from its own stream derived from
//! `(seed, r, k)`. A replication whose simulation overflows or whose fit is
//! singular or loses precision is retried with `k + 1`, up to the retry
//! limit, and every retry is counted.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ar::{simulate_with_rng, ArModel, ReferenceModel};
use crate::error::{invalid, Error, Result};
use crate::estimation::fit_and_residuals;
use crate::gof::{GofTest, TestConfig};
use crate::kde::Bandwidth;
use crate::noise::NoiseSpec;
use crate::par::map_indexed;
use crate::rng::stream;

pub const DEFAULT_RETRY_LIMIT: u32 = 10;
pub const DEFAULT_LEVEL_REPS: usize = 1000;

/// A reference model alias (`"m0"`..`"m5"`) or an explicit coefficient list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Alias(ReferenceModel),
    Theta(ArModel),
}

impl ModelSpec {
    pub fn model(&self) -> ArModel {
        match self {
            ModelSpec::Alias(m) => m.model(),
            ModelSpec::Theta(m) => m.clone(),
        }
    }

    /// Whether the model has a unit root at `+1`, where the asymptotic
    /// level is not guaranteed.
    pub fn has_positive_unit_root(&self) -> bool {
        let m = self.model();
        m.order() > 0
            && m.eigenvalues()
                .map(|ev| ev.iter().any(|z| (z.re - 1.0).abs() < 1e-8 && z.im.abs() < 1e-8))
                .unwrap_or(false)
    }
}

impl From<ReferenceModel> for ModelSpec {
    fn from(m: ReferenceModel) -> Self {
        ModelSpec::Alias(m)
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Alias(m) => write!(f, "{m}"),
            ModelSpec::Theta(m) => write!(f, "{m}"),
        }
    }
}

fn default_retry_limit() -> u32 {
    DEFAULT_RETRY_LIMIT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub model: ModelSpec,
    /// Distribution of the simulated innovations.
    pub noise: NoiseSpec,
    pub test: TestConfig,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    #[serde(default = "default_retry_limit")]
    pub retry_limit: u32,
    /// Initial values `(X_0, …, X_{-p+1})`; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi0: Option<Vec<f64>>,
    /// Keep every replication's `z` in the report.
    #[serde(default)]
    pub dump_z: bool,
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(invalid("reps must be at least 1"));
        }
        let model = self.model.model();
        if self.n <= model.order() + 1 {
            return Err(invalid(format!("n = {} too small for order {}", self.n, model.order())));
        }
        let noise = self.noise.validated()?;
        if model.order() > 0 && !noise.has_finite_variance() {
            return Err(invalid(format!(
                "{noise} has infinite variance; heavy-tailed innovations are only allowed for the neutral model"
            )));
        }
        if let Some(phi0) = &self.phi0 {
            if phi0.len() != model.order() {
                return Err(Error::Shape(format!(
                    "phi0 has length {}, model order is {}",
                    phi0.len(),
                    model.order()
                )));
            }
        }
        self.test.validate()
    }
}

/// Summary of one replicated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub model: String,
    pub n: usize,
    pub h: f64,
    pub rejection_rate: f64,
    /// `√(r(1-r)/reps)`.
    pub stderr: f64,
    pub reps_used: usize,
    pub retries: u64,
    pub z_mean: f64,
    pub z_sd: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks_rejection_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
}

pub fn binomial_stderr(rate: f64, reps: usize) -> f64 {
    (rate * (1.0 - rate) / reps as f64).sqrt()
}

#[derive(Debug, Clone, Copy)]
struct RepOutcome {
    z: f64,
    reject: bool,
    ks_reject: Option<bool>,
    retries: u32,
}

fn run_rep(cfg: &McConfig, model: &ArModel, truth: &NoiseSpec, test: &GofTest, rep: usize) -> Result<RepOutcome> {
    let mut last = None;
    for attempt in 0..=cfg.retry_limit {
        let mut rng = stream(cfg.seed, rep as u64, attempt as u64);
        let outcome = simulate_with_rng(model, truth, cfg.n, cfg.phi0.as_deref(), &mut rng)
            .and_then(|series| fit_and_residuals(&series, model.order()))
            .and_then(|(_, res)| test.run(&res));
        match outcome {
            Ok(r) => {
                let alpha = test.config().alpha;
                return Ok(RepOutcome {
                    z: r.br.z,
                    reject: r.reject,
                    ks_reject: r.baseline_ks.map(|k| k.p < alpha),
                    retries: attempt,
                });
            }
            Err(e) if e.is_retryable() => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(Error::RetriesExhausted {
        rep,
        limit: cfg.retry_limit as usize,
        last: Box::new(last.expect("at least one attempt")),
    })
}

fn run_experiment(cfg: &McConfig, truth: &NoiseSpec) -> Result<McReport> {
    cfg.validate()?;
    let truth = truth.validated()?;
    let model = cfg.model.model();
    if model.order() > 0 && !truth.has_finite_variance() {
        return Err(invalid(format!(
            "{truth} has infinite variance; heavy-tailed innovations are only allowed for the neutral model"
        )));
    }
    let test = GofTest::new(&cfg.test)?;
    let outcomes = map_indexed(cfg.reps, |rep| run_rep(cfg, &model, &truth, &test, rep));
    let outcomes: Vec<RepOutcome> = outcomes.into_iter().collect::<Result<_>>()?;

    let reps = outcomes.len();
    let rejections = outcomes.iter().filter(|o| o.reject).count();
    let rate = rejections as f64 / reps as f64;
    let z: Vec<f64> = outcomes.iter().map(|o| o.z).collect();
    let z_mean = z.iter().sum::<f64>() / reps as f64;
    let z_sd = if reps > 1 {
        (z.iter().map(|v| (v - z_mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt()
    } else {
        0.0
    };
    let ks_rejection_rate = cfg.test.ks_baseline.then(|| {
        outcomes.iter().filter(|o| o.ks_reject == Some(true)).count() as f64 / reps as f64
    });
    let note = cfg
        .model
        .has_positive_unit_root()
        .then(|| "unit root at +1: outside the asymptotic level guarantee".to_string());
    Ok(McReport {
        model: cfg.model.to_string(),
        n: cfg.n,
        h: cfg.test.bandwidth.at(cfg.n),
        rejection_rate: rate,
        stderr: binomial_stderr(rate, reps),
        reps_used: reps,
        retries: outcomes.iter().map(|o| o.retries as u64).sum(),
        z_mean,
        z_sd,
        ks_rejection_rate,
        z_values: cfg.dump_z.then_some(z),
        note,
        runtime_seconds: None,
    })
}

/// Rejection rate when the innovations follow `f₀`.
pub fn empirical_level(cfg: &McConfig) -> Result<McReport> {
    if cfg.noise != cfg.test.f0 {
        return Err(invalid(format!(
            "level experiment needs noise = f0, got {} and {}",
            cfg.noise, cfg.test.f0
        )));
    }
    run_experiment(cfg, &cfg.noise)
}

/// Rejection rate when the innovations follow `alternative`.
pub fn empirical_power(cfg: &McConfig, alternative: &NoiseSpec) -> Result<McReport> {
    run_experiment(cfg, alternative)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub parameter: f64,
    pub alternative: NoiseSpec,
    pub report: McReport,
}

/// Which family of alternatives a sweep runs through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    /// `N(m, 1)` over the means.
    Mean,
    /// `N(0, σ²)` over the variances.
    Variance,
}

impl SweepKind {
    pub fn alternative(self, parameter: f64) -> Result<NoiseSpec> {
        match self {
            SweepKind::Mean => NoiseSpec::normal(parameter, 1.0),
            SweepKind::Variance => NoiseSpec::normal(0.0, parameter),
        }
    }
}

/// Power at each sweep point. All points share the seed, so neighbouring
/// points use common random numbers and the curve is smooth.
pub fn power_sweep(cfg: &McConfig, kind: SweepKind, parameters: &[f64]) -> Result<Vec<PowerPoint>> {
    parameters
        .iter()
        .map(|&parameter| {
            let alternative = kind.alternative(parameter)?;
            Ok(PowerPoint {
                parameter,
                alternative,
                report: empirical_power(cfg, &alternative)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub h0: f64,
    pub level: f64,
    pub target: f64,
    pub tolerance: f64,
    /// Every `(h0, level)` evaluated, in order.
    pub trace: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSearch {
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_bisections")]
    pub max_bisections: usize,
}

fn default_grid() -> usize {
    9
}

fn default_tolerance() -> f64 {
    0.005
}

fn default_bisections() -> usize {
    10
}

impl CalibrationSearch {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            grid: default_grid(),
            tolerance: default_tolerance(),
            max_bisections: default_bisections(),
        }
    }
}

/// Searches `h0` so that the level on the neutral model is within the
/// tolerance of `target`. `base` supplies everything but the model and `h0`.
/// A grid pass is followed by bisection on the first bracketing pair.
pub fn calibrate_h0(target: f64, base: &McConfig, search: &CalibrationSearch) -> Result<Calibration> {
    if !(target > 0.0 && target < 1.0) {
        return Err(invalid(format!("target level must lie in (0, 1), got {target}")));
    }
    if !(search.lo > 0.0 && search.hi >= search.lo && search.hi.is_finite()) {
        return Err(invalid(format!("bad search range [{}, {}]", search.lo, search.hi)));
    }
    let mut trace = Vec::new();
    let mut level_at = |h0: f64| -> Result<f64> {
        let mut cfg = base.clone();
        cfg.model = ModelSpec::Alias(ReferenceModel::M0);
        cfg.noise = cfg.test.f0;
        cfg.test.bandwidth = Bandwidth::new(h0, base.test.bandwidth.kappa)?;
        cfg.dump_z = false;
        let level = empirical_level(&cfg)?.rejection_rate;
        trace.push((h0, level));
        Ok(level)
    };
    let done = |h0, level, trace| Calibration {
        h0,
        level,
        target,
        tolerance: search.tolerance,
        trace,
    };

    if search.lo == search.hi {
        let level = level_at(search.lo)?;
        return Ok(done(search.lo, level, trace));
    }
    let g = search.grid.max(2);
    let grid: Vec<f64> = (0..g)
        .map(|i| search.lo + (search.hi - search.lo) * i as f64 / (g - 1) as f64)
        .collect();
    let mut levels = Vec::with_capacity(g);
    for &h0 in &grid {
        levels.push(level_at(h0)?);
    }
    let best = (0..g)
        .min_by(|&a, &b| (levels[a] - target).abs().total_cmp(&(levels[b] - target).abs()))
        .expect("grid is non-empty");
    if (levels[best] - target).abs() <= search.tolerance {
        let (h0, level) = (grid[best], levels[best]);
        return Ok(done(h0, level, trace));
    }
    let bracket = (0..g - 1).find(|&i| (levels[i] - target) * (levels[i + 1] - target) < 0.0);
    if let Some(i) = bracket {
        let (mut a, mut b) = (grid[i], grid[i + 1]);
        let sign_a = (levels[i] - target).signum();
        for _ in 0..search.max_bisections {
            let m = 0.5 * (a + b);
            let level = level_at(m)?;
            if (level - target).abs() <= search.tolerance {
                return Ok(done(m, level, trace));
            }
            if (level - target).signum() == sign_a {
                a = m;
            } else {
                b = m;
            }
        }
    }
    Err(Error::Calibration(format!(
        "no h0 in [{}, {}] reaches level {target} ± {}; closest {} at h0 = {}",
        search.lo, search.hi, search.tolerance, levels[best], grid[best]
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kde::KernelSpec;

    fn cfg(model: ReferenceModel, n: usize, reps: usize) -> McConfig {
        McConfig {
            model: model.into(),
            noise: NoiseSpec::STANDARD_NORMAL,
            test: TestConfig {
                delta: 2.0,
                alpha: 0.05,
                kernel: KernelSpec::Gaussian,
                bandwidth: Bandwidth::new(0.14, 0.23).unwrap(),
                f0: NoiseSpec::STANDARD_NORMAL,
                ks_baseline: false,
            },
            n,
            reps,
            seed: 11,
            retry_limit: DEFAULT_RETRY_LIMIT,
            phi0: None,
            dump_z: true,
        }
    }

    #[test]
    fn single_rep_is_deterministic() {
        let c = cfg(ReferenceModel::M0, 100, 1);
        let a = empirical_level(&c).unwrap();
        assert!(a.rejection_rate == 0.0 || a.rejection_rate == 1.0);
        assert_eq!(a, empirical_level(&c).unwrap());
    }

    #[test]
    fn z_values_match_rejections() {
        let c = cfg(ReferenceModel::M1, 80, 20);
        let r = empirical_level(&c).unwrap();
        let z = r.z_values.as_ref().unwrap();
        assert_eq!(z.len(), 20);
        let u = crate::special::normal_quantile(0.95);
        let count = z.iter().filter(|&&v| v > u).count();
        assert_eq!(r.rejection_rate, count as f64 / 20.0);
        assert!((r.stderr - binomial_stderr(r.rejection_rate, 20)).abs() < 1e-15);
    }

    #[test]
    fn level_requires_null_noise() {
        let mut c = cfg(ReferenceModel::M0, 50, 2);
        c.noise = NoiseSpec::normal(1.0, 1.0).unwrap();
        assert!(empirical_level(&c).is_err());
        assert!(empirical_power(&c, &c.noise.clone()).is_ok());
    }

    #[test]
    fn heavy_tails_only_for_neutral_model() {
        let c = cfg(ReferenceModel::M1, 50, 2);
        let cauchy = NoiseSpec::Cauchy { scale: 1.0 };
        assert!(empirical_power(&c, &cauchy).is_err());
        let c = cfg(ReferenceModel::M0, 50, 2);
        assert!(empirical_power(&c, &cauchy).is_ok());
    }

    #[test]
    fn unit_root_note() {
        assert!(ModelSpec::from(ReferenceModel::M4).has_positive_unit_root());
        assert!(!ModelSpec::from(ReferenceModel::M3).has_positive_unit_root());
        assert!(!ModelSpec::from(ReferenceModel::M0).has_positive_unit_root());
        let r = empirical_level(&cfg(ReferenceModel::M4, 60, 2)).unwrap();
        assert!(r.note.is_some());
    }

    #[test]
    fn explosive_retries_are_counted() {
        // n = 900 loses precision on every attempt.
        let mut c = cfg(ReferenceModel::M5, 900, 1);
        c.retry_limit = 2;
        match empirical_level(&c) {
            Err(Error::RetriesExhausted { limit, .. }) => assert_eq!(limit, 2),
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn model_spec_serde() {
        let a: ModelSpec = serde_json::from_str("\"m3\"").unwrap();
        assert_eq!(a, ModelSpec::Alias(ReferenceModel::M3));
        let b: ModelSpec = serde_json::from_str("[0.5, 0.2]").unwrap();
        assert_eq!(b.model().theta(), &[0.5, 0.2]);
        assert!(serde_json::from_str::<ModelSpec>("\"m9\"").is_err());
    }

    #[test]
    fn degenerate_calibration_range() {
        let c = cfg(ReferenceModel::M0, 50, 10);
        let cal = calibrate_h0(0.05, &c, &CalibrationSearch::new(0.2, 0.2)).unwrap();
        assert_eq!(cal.h0, 0.2);
        assert_eq!(cal.trace.len(), 1);
    }
}
