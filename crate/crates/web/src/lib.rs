//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export takes plain numbers and strings and returns a JSON string,
//! which keeps the JavaScript side free of generated glue types.

use br_ar::estimation::fit_and_residuals;
use br_ar::gof::{wiener_functional_path, wiener_functional_quantiles, GofTest, TestReport};
use br_ar::kde::{Bandwidth, KernelDensity, KernelSpec};
use br_ar::montecarlo::{power_sweep, McConfig, SweepKind};
use br_ar::ar::simulate;
use br_ar::{NoiseSpec, ReferenceModel, TestConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const F0: NoiseSpec = NoiseSpec::STANDARD_NORMAL;
const DELTA: f64 = 2.0;
const ALPHA: f64 = 0.05;
const KAPPA: f64 = 0.23;
const PLOT_POINTS: usize = 161;

#[derive(Debug, Serialize)]
pub struct TestView {
    pub series: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub report: TestReport,
    pub x: Vec<f64>,
    pub f_hat: Vec<f64>,
    pub f0: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct PowerView {
    pub parameter: f64,
    pub br: f64,
    pub ks: f64,
    pub stderr: f64,
}

#[derive(Debug, Serialize)]
pub struct WienerView {
    pub q90: f64,
    pub q95: f64,
    pub q99: f64,
    /// Bin edges and counts of the first paths, clipped at the 0.99 quantile.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

fn test_config(kernel: &str, h0: f64) -> Result<TestConfig, String> {
    let cfg = TestConfig {
        delta: DELTA,
        alpha: ALPHA,
        kernel: kernel.parse::<KernelSpec>().map_err(|e| e.to_string())?,
        bandwidth: Bandwidth::new(h0, KAPPA).map_err(|e| e.to_string())?,
        f0: F0,
        ks_baseline: true,
    };
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

/// Simulates one series, fits it and tests the residuals against `N(0, 1)`.
pub fn test_view(model: &str, noise: &str, n: usize, seed: u64, kernel: &str, h0: f64) -> Result<TestView, String> {
    let model = model.parse::<ReferenceModel>().map_err(|e| e.to_string())?.model();
    let noise: NoiseSpec = noise.parse().map_err(|e: br_ar::Error| e.to_string())?;
    let series = simulate(&model, &noise, n, None, seed).map_err(|e| e.to_string())?;
    let (fit, res) = fit_and_residuals(&series, model.order()).map_err(|e| e.to_string())?;
    let test = GofTest::new(&test_config(kernel, h0)?).map_err(|e| e.to_string())?;
    let report = test.run(&res).map_err(|e| e.to_string())?;
    let kde = KernelDensity::from_residuals(&res, test.kernel(), report.br.h).map_err(|e| e.to_string())?;
    let lim = DELTA + 1.0;
    let x: Vec<f64> = (0..PLOT_POINTS)
        .map(|i| -lim + 2.0 * lim * i as f64 / (PLOT_POINTS - 1) as f64)
        .collect();
    Ok(TestView {
        series: series.observations().to_vec(),
        theta_hat: fit.map(|f| f.theta_hat).unwrap_or_default(),
        report,
        f_hat: x.iter().map(|&v| kde.eval(v)).collect(),
        f0: x.iter().map(|&v| F0.density(v)).collect(),
        x,
    })
}

/// Power of the residual test and of the KS baseline over a mean or
/// variance sweep.
pub fn power_view(model: &str, n: usize, reps: usize, seed: u64, sweep: &str, parameters: &[f64]) -> Result<Vec<PowerView>, String> {
    let kind = match sweep {
        "mean" => SweepKind::Mean,
        "variance" => SweepKind::Variance,
        other => return Err(format!("unknown sweep {other:?}")),
    };
    let cfg = McConfig {
        model: model.parse::<ReferenceModel>().map_err(|e| e.to_string())?.into(),
        noise: F0,
        test: test_config("gaussian", 0.14)?,
        n,
        reps,
        seed,
        retry_limit: 10,
        phi0: None,
        dump_z: false,
    };
    cfg.validate().map_err(|e| e.to_string())?;
    let points = power_sweep(&cfg, kind, parameters).map_err(|e| e.to_string())?;
    Ok(points
        .into_iter()
        .map(|p| PowerView {
            parameter: p.parameter,
            br: p.report.rejection_rate,
            ks: p.report.ks_rejection_rate.unwrap_or(f64::NAN),
            stderr: p.report.stderr,
        })
        .collect())
}

/// Quantiles of the unit-root Wiener functional plus a histogram.
pub fn wiener_view(reps: usize, steps: usize, seed: u64, bins: usize) -> Result<WienerView, String> {
    let q = wiener_functional_quantiles(reps, steps, seed).map_err(|e| e.to_string())?;
    let bins = bins.max(1);
    let top = q.q99;
    let mut counts = vec![0; bins];
    for path in 0..reps.min(20_000) as u64 {
        let z = wiener_functional_path(seed, path, steps);
        if z < top {
            counts[((z / top) * bins as f64) as usize % bins] += 1;
        }
    }
    Ok(WienerView {
        q90: q.q90,
        q95: q.q95,
        q99: q.q99,
        edges: (0..=bins).map(|i| top * i as f64 / bins as f64).collect(),
        counts,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = runTest)]
pub fn run_test(model: &str, noise: &str, n: usize, seed: u64, kernel: &str, h0: f64) -> Result<String, JsError> {
    to_js(test_view(model, noise, n, seed, kernel, h0))
}

#[wasm_bindgen(js_name = powerCurve)]
pub fn power_curve(model: &str, n: usize, reps: usize, seed: u64, sweep: &str, parameters: Vec<f64>) -> Result<String, JsError> {
    to_js(power_view(model, n, reps, seed, sweep, &parameters))
}

#[wasm_bindgen(js_name = wienerQuantiles)]
pub fn wiener_quantiles(reps: usize, steps: usize, seed: u64, bins: usize) -> Result<String, JsError> {
    to_js(wiener_view(reps, steps, seed, bins))
}
