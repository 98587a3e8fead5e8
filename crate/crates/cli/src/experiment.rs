//! Experiment records and their execution. Command-line flags and JSON
//! experiment files both end up here, so the two entry points cannot drift.

use br_ar::ar::{simulate, ReferenceModel};
use br_ar::estimation::{fit_and_residuals, ols_estimate, residuals};
use br_ar::gof::{wiener_functional_quantiles, GofTest, TestConfig, TestReport, WienerQuantiles, WIENER_DEFAULT_STEPS};
use br_ar::kde::{Bandwidth, KernelDensity, KernelSpec};
use br_ar::montecarlo::{
    calibrate_h0, empirical_level, empirical_power, power_sweep, Calibration, CalibrationSearch, McConfig,
    McReport, ModelSpec, PowerPoint, SweepKind, DEFAULT_LEVEL_REPS, DEFAULT_RETRY_LIMIT,
};
use br_ar::rates::{rate_check, RateQuantity, RateReport, DEFAULT_RATE_REPS, DEFAULT_RATE_TOLERANCE};
use br_ar::{ArModel, Error, NoiseSpec, Regime, TimeSeries};
use serde::{Deserialize, Serialize};

use crate::output::Table;

/// One experiment, as read from a JSON file:
/// `{"command": "level", "config": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "config", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    Simulate(SimulateConfig),
    Estimate(EstimateConfig),
    Test(TestRunConfig),
    Level(McConfig),
    Power(PowerConfig),
    Calibrate(CalibrateConfig),
    Ratecheck(RateCheckConfig),
    WienerQuantiles(WienerConfig),
    Table1(Table1Config),
}

fn standard_normal() -> NoiseSpec {
    NoiseSpec::STANDARD_NORMAL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: ModelSpec,
    #[serde(default = "standard_normal")]
    pub noise: NoiseSpec,
    pub n: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi0: Option<Vec<f64>>,
}

/// Observed data: the first `order` values are the presample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataInput {
    pub values: Vec<f64>,
    pub order: usize,
}

/// Either `data` is given, or a series is simulated from `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataInput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestRunConfig {
    /// Series to simulate; its noise is the truth, which may differ from `f0`.
    pub simulate: SimulateConfig,
    pub test: TestConfig,
    /// Points of the `f̂ₙ` versus `f₀` plot grid on `[-δ, δ]`.
    #[serde(default = "default_plot_points")]
    pub plot_points: usize,
}

fn default_plot_points() -> usize {
    201
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerConfig {
    pub model: ModelSpec,
    pub test: TestConfig,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    #[serde(default = "default_retry_limit")]
    pub retry_limit: u32,
    /// Sweep family; `parameters` are means or variances.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepKind>,
    #[serde(default)]
    pub parameters: Vec<f64>,
    /// Explicit alternatives, run after the sweep.
    #[serde(default)]
    pub alternatives: Vec<NoiseSpec>,
}

fn default_retry_limit() -> u32 {
    DEFAULT_RETRY_LIMIT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateConfig {
    pub target: f64,
    pub kernel: KernelSpec,
    pub kappa: f64,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub search: CalibrationSearch,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "standard_normal")]
    pub f0: NoiseSpec,
}

fn default_delta() -> f64 {
    2.0
}

fn default_alpha() -> f64 {
    0.05
}

fn default_rate_reps() -> usize {
    DEFAULT_RATE_REPS
}

fn default_rate_tolerance() -> f64 {
    DEFAULT_RATE_TOLERANCE
}

/// `quantity` absent runs the whole catalogue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateCheckConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantity: Option<RateQuantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<usize>>,
    #[serde(default = "default_rate_reps")]
    pub reps: usize,
    pub seed: u64,
    #[serde(default = "default_rate_tolerance")]
    pub tolerance: f64,
}

fn default_wiener_steps() -> usize {
    WIENER_DEFAULT_STEPS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WienerConfig {
    pub reps: usize,
    #[serde(default = "default_wiener_steps")]
    pub steps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table1Cell {
    pub kernel: KernelSpec,
    pub n: usize,
    pub h0: f64,
}

/// The published bandwidth grid: gaussian and smoothed uniform kernels at
/// `n ∈ {50, 100, 500}`.
pub fn table1_cells() -> Vec<Table1Cell> {
    let g = KernelSpec::Gaussian;
    let u = KernelSpec::SmoothedUniform { eps_s: br_ar::kde::DEFAULT_TAPER };
    [(g, 50, 0.10), (g, 100, 0.14), (g, 500, 0.14), (u, 50, 0.20), (u, 100, 0.25), (u, 500, 0.32)]
        .into_iter()
        .map(|(kernel, n, h0)| Table1Cell { kernel, n, h0 })
        .collect()
}

fn default_models() -> Vec<ReferenceModel> {
    ReferenceModel::ALL.to_vec()
}

pub const DEFAULT_KAPPA: f64 = 0.23;

fn default_kappa() -> f64 {
    DEFAULT_KAPPA
}

fn default_level_reps() -> usize {
    DEFAULT_LEVEL_REPS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table1Config {
    #[serde(default = "default_level_reps")]
    pub reps: usize,
    pub seed: u64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_retry_limit")]
    pub retry_limit: u32,
    #[serde(default = "default_models")]
    pub models: Vec<ReferenceModel>,
    #[serde(default = "table1_cells")]
    pub cells: Vec<Table1Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    pub theta: Vec<f64>,
    pub regime: Option<Regime>,
    pub n: usize,
    /// `X_{-p+1}, …, X_n`.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub order: usize,
    pub n: usize,
    pub theta_hat: Vec<f64>,
    pub condition_estimate: Option<f64>,
    pub regime_hat: Option<Regime>,
    pub residual_mean: f64,
    pub residual_variance: f64,
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRunReport {
    pub theta_hat: Vec<f64>,
    pub report: TestReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub kernel: KernelSpec,
    pub n: usize,
    pub h0: f64,
    pub model: ReferenceModel,
    pub rate: f64,
    pub stderr: f64,
    pub retries: u64,
}

/// Result of one experiment, ready to be written.
pub struct Outcome {
    pub result: serde_json::Value,
    pub table: Table,
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn regime_of(model: &ArModel) -> Option<Regime> {
    model.regime().ok()
}

fn simulate_series(c: &SimulateConfig) -> br_ar::Result<(ArModel, TimeSeries)> {
    let model = c.model.model();
    let series = simulate(&model, &c.noise, c.n, c.phi0.as_deref(), c.seed)?;
    Ok((model, series))
}

/// Runs an experiment. With `timing`, Monte Carlo reports carry their
/// wall-clock runtime.
pub fn run(exp: &Experiment, timing: bool) -> br_ar::Result<Outcome> {
    let clock = std::time::Instant::now();
    let stamp = |mut r: McReport| {
        if timing {
            r.runtime_seconds = Some(clock.elapsed().as_secs_f64());
        }
        r
    };
    match exp {
        Experiment::Simulate(c) => {
            let (model, series) = simulate_series(c)?;
            let p = model.order() as i64;
            let mut table = Table::new(&["t", "x"]);
            for (i, x) in series.values().iter().enumerate() {
                table.row(vec![(i as i64 - p + 1).to_string(), x.to_string()]);
            }
            let report = SeriesReport {
                theta: model.theta().to_vec(),
                regime: regime_of(&model),
                n: series.n(),
                values: series.values().to_vec(),
            };
            Ok(Outcome { result: to_value(&report), table })
        }
        Experiment::Estimate(c) => {
            let (series, order) = match (&c.simulate, &c.data) {
                (Some(s), None) => {
                    let (model, series) = simulate_series(s)?;
                    (series, model.order())
                }
                (None, Some(d)) => (TimeSeries::new(d.values.clone(), d.order)?, d.order),
                _ => return Err(Error::InvalidParameter("give exactly one of `simulate` and `data`".into())),
            };
            let (fit, res) = if order == 0 {
                fit_and_residuals(&series, 0)?
            } else {
                let fit = ols_estimate(&series, order)?;
                let res = residuals(&series, &fit.theta_hat)?;
                (Some(fit), res)
            };
            let theta_hat = fit.as_ref().map(|f| f.theta_hat.clone()).unwrap_or_default();
            let regime_hat = ArModel::new(theta_hat.clone()).ok().and_then(|m| regime_of(&m));
            let v = res.values();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / v.len() as f64;
            let mut table = Table::new(&["t", "x", "residual"]);
            for (t, (x, e)) in series.observations().iter().zip(v).enumerate() {
                table.row(vec![(t + 1).to_string(), x.to_string(), e.to_string()]);
            }
            let report = EstimateReport {
                order,
                n: series.n(),
                theta_hat,
                condition_estimate: fit.as_ref().map(|f| f.condition_estimate),
                regime_hat,
                residual_mean: mean,
                residual_variance: var,
                residuals: v.to_vec(),
            };
            Ok(Outcome { result: to_value(&report), table })
        }
        Experiment::Test(c) => {
            let (model, series) = simulate_series(&c.simulate)?;
            let (fit, res) = fit_and_residuals(&series, model.order())?;
            let test = GofTest::new(&c.test)?;
            let report = test.run(&res)?;
            let kde = KernelDensity::from_residuals(&res, test.kernel(), report.br.h)?;
            let mut table = Table::new(&["x", "f_hat", "f0"]);
            let m = c.plot_points.max(2);
            for i in 0..m {
                let x = -c.test.delta + 2.0 * c.test.delta * i as f64 / (m - 1) as f64;
                table.row(vec![x.to_string(), kde.eval(x).to_string(), c.test.f0.density(x).to_string()]);
            }
            let out = TestRunReport {
                theta_hat: fit.map(|f| f.theta_hat).unwrap_or_default(),
                report,
            };
            Ok(Outcome { result: to_value(&out), table })
        }
        Experiment::Level(c) => {
            let report = stamp(empirical_level(c)?);
            let table = match &report.z_values {
                Some(z) => {
                    let u = GofTest::new(&c.test)?.critical_value();
                    let mut t = Table::new(&["rep", "z", "reject"]);
                    for (i, v) in z.iter().enumerate() {
                        t.row(vec![i.to_string(), v.to_string(), (*v > u).to_string()]);
                    }
                    t
                }
                None => {
                    let mut t = Table::new(&["model", "n", "h", "rate", "stderr", "retries"]);
                    t.row(vec![
                        report.model.clone(),
                        report.n.to_string(),
                        report.h.to_string(),
                        report.rejection_rate.to_string(),
                        report.stderr.to_string(),
                        report.retries.to_string(),
                    ]);
                    t
                }
            };
            Ok(Outcome { result: to_value(&report), table })
        }
        Experiment::Power(c) => {
            let base = McConfig {
                model: c.model.clone(),
                noise: c.test.f0,
                test: c.test,
                n: c.n,
                reps: c.reps,
                seed: c.seed,
                retry_limit: c.retry_limit,
                phi0: None,
                dump_z: false,
            };
            let mut points: Vec<PowerPoint> = match c.sweep {
                Some(kind) => power_sweep(&base, kind, &c.parameters)?,
                None if !c.parameters.is_empty() => {
                    return Err(Error::InvalidParameter("`parameters` need a `sweep` kind".into()))
                }
                None => Vec::new(),
            };
            for alt in &c.alternatives {
                points.push(PowerPoint {
                    parameter: f64::NAN,
                    alternative: *alt,
                    report: empirical_power(&base, alt)?,
                });
            }
            if points.is_empty() {
                return Err(Error::InvalidParameter("nothing to run: give a sweep or alternatives".into()));
            }
            // NaN is not representable in JSON; alternatives carry no sweep parameter.
            let rows: Vec<PowerRow> = points
                .into_iter()
                .map(|p| PowerRow {
                    parameter: p.parameter.is_finite().then_some(p.parameter),
                    alternative: p.alternative,
                    report: stamp(p.report),
                })
                .collect();
            let mut table = Table::new(&["alternative", "parameter", "power", "stderr", "ks_power", "retries"]);
            for r in &rows {
                table.row(vec![
                    r.alternative.to_string(),
                    r.parameter.map(|p| p.to_string()).unwrap_or_default(),
                    r.report.rejection_rate.to_string(),
                    r.report.stderr.to_string(),
                    r.report.ks_rejection_rate.map(|p| p.to_string()).unwrap_or_default(),
                    r.report.retries.to_string(),
                ]);
            }
            Ok(Outcome { result: to_value(&rows), table })
        }
        Experiment::Calibrate(c) => {
            let base = McConfig {
                model: ModelSpec::Alias(ReferenceModel::M0),
                noise: c.f0,
                test: TestConfig {
                    delta: c.delta,
                    alpha: c.alpha,
                    kernel: c.kernel,
                    bandwidth: Bandwidth::new(c.search.lo, c.kappa)?,
                    f0: c.f0,
                    ks_baseline: false,
                },
                n: c.n,
                reps: c.reps,
                seed: c.seed,
                retry_limit: DEFAULT_RETRY_LIMIT,
                phi0: None,
                dump_z: false,
            };
            let cal: Calibration = calibrate_h0(c.target, &base, &c.search)?;
            let mut table = Table::new(&["h0", "level"]);
            for (h0, level) in &cal.trace {
                table.row(vec![h0.to_string(), level.to_string()]);
            }
            Ok(Outcome { result: to_value(&cal), table })
        }
        Experiment::Ratecheck(c) => {
            let quantities: Vec<RateQuantity> = match c.quantity {
                Some(q) => vec![q],
                None => RateQuantity::CATALOGUE.to_vec(),
            };
            let mut reports: Vec<RateReport> = Vec::with_capacity(quantities.len());
            for q in quantities {
                let grid = c.n_grid.clone().unwrap_or_else(|| q.default_grid());
                reports.push(rate_check(q, &grid, c.reps, c.seed, c.tolerance)?);
            }
            let mut table = Table::new(&["quantity", "n", "median", "slope", "theory", "pass"]);
            for r in &reports {
                for (n, m) in r.n_grid.iter().zip(&r.medians) {
                    table.row(vec![
                        r.quantity.to_string(),
                        n.to_string(),
                        m.to_string(),
                        r.slope.to_string(),
                        r.theory.map(|t| t.to_string()).unwrap_or_default(),
                        r.pass.to_string(),
                    ]);
                }
            }
            let result = if c.quantity.is_some() { to_value(&reports[0]) } else { to_value(&reports) };
            Ok(Outcome { result, table })
        }
        Experiment::WienerQuantiles(c) => {
            let q: WienerQuantiles = wiener_functional_quantiles(c.reps, c.steps, c.seed)?;
            let mut table = Table::new(&["level", "quantile"]);
            for (l, v) in [(0.90, q.q90), (0.95, q.q95), (0.99, q.q99)] {
                table.row(vec![l.to_string(), v.to_string()]);
            }
            Ok(Outcome { result: to_value(&q), table })
        }
        Experiment::Table1(c) => {
            let rows = table1(c)?;
            let mut table = Table::new(&["kernel", "n", "h0", "model", "rate", "stderr", "retries"]);
            for r in &rows {
                table.row(vec![
                    kernel_label(&r.kernel),
                    r.n.to_string(),
                    r.h0.to_string(),
                    r.model.to_string(),
                    r.rate.to_string(),
                    r.stderr.to_string(),
                    r.retries.to_string(),
                ]);
            }
            Ok(Outcome { result: to_value(&rows), table })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub parameter: Option<f64>,
    pub alternative: NoiseSpec,
    pub report: McReport,
}

fn kernel_label(k: &KernelSpec) -> String {
    match k {
        KernelSpec::Gaussian => "gaussian".into(),
        KernelSpec::SmoothedUniform { eps_s } if *eps_s == br_ar::kde::DEFAULT_TAPER => "uniform".into(),
        other => other.to_string(),
    }
}

/// Empirical levels over the kernel × n × model grid.
pub fn table1(c: &Table1Config) -> br_ar::Result<Vec<Table1Row>> {
    let mut rows = Vec::new();
    for cell in &c.cells {
        for &model in &c.models {
            let cfg = McConfig {
                model: model.into(),
                noise: NoiseSpec::STANDARD_NORMAL,
                test: TestConfig {
                    delta: c.delta,
                    alpha: c.alpha,
                    kernel: cell.kernel,
                    bandwidth: Bandwidth::new(cell.h0, c.kappa)?,
                    f0: NoiseSpec::STANDARD_NORMAL,
                    ks_baseline: false,
                },
                n: cell.n,
                reps: c.reps,
                seed: c.seed,
                retry_limit: c.retry_limit,
                phi0: None,
                dump_z: false,
            };
            let r = empirical_level(&cfg)?;
            rows.push(Table1Row {
                kernel: cell.kernel,
                n: cell.n,
                h0: cell.h0,
                model,
                rate: r.rejection_rate,
                stderr: r.stderr,
                retries: r.retries,
            });
        }
    }
    Ok(rows)
}
