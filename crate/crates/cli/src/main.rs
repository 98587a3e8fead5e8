//! `br-ar`: Bickel-Rosenblatt goodness-of-fit experiments on AR residuals.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for numerical
//! failures.

mod experiment;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use br_ar::gof::{TestConfig, WIENER_DEFAULT_STEPS};
use br_ar::kde::{Bandwidth, KernelSpec};
use br_ar::montecarlo::{CalibrationSearch, McConfig, ModelSpec, SweepKind, DEFAULT_RETRY_LIMIT};
use br_ar::rates::{parse_grid, RateQuantity};
use br_ar::{ArModel, NoiseSpec, ReferenceModel};
use clap::{Args, Parser, Subcommand};

use experiment::{
    CalibrateConfig, DataInput, EstimateConfig, Experiment, PowerConfig, RateCheckConfig, SimulateConfig,
    Table1Config, TestRunConfig, WienerConfig, DEFAULT_KAPPA,
};

#[derive(Parser)]
#[command(name = "br-ar", version, about = "Bickel-Rosenblatt goodness-of-fit tests on AR(p) residuals")]
struct Cli {
    /// Worker threads for replications (default: all cores).
    #[arg(long, global = true, env = "BR_AR_JOBS")]
    jobs: Option<usize>,
    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write plot data as CSV.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Include wall-clock runtimes in Monte Carlo reports.
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an AR path.
    Simulate(SimulateArgs),
    /// Fit an AR model by least squares and return the residuals.
    Estimate(EstimateArgs),
    /// Run one goodness-of-fit test on a simulated path.
    Test(TestArgs),
    /// Empirical level under the null.
    Level(LevelArgs),
    /// Empirical power over a sweep of alternatives.
    Power(PowerArgs),
    /// Search h0 giving a target level on the neutral model.
    Calibrate(CalibrateArgs),
    /// Empirical growth rates of AR functionals.
    Ratecheck(RateArgs),
    /// Monte Carlo quantiles of the Wiener functional.
    WienerQuantiles(WienerArgs),
    /// Empirical levels over the kernel × n × model grid.
    Table1(Table1Args),
    /// Run an experiment described by a JSON file.
    Run {
        /// `{"command": "...", "config": {...}}`
        file: PathBuf,
    },
}

// clap reads `Option<Vec<_>>` as a repeated flag; these wrappers keep a
// comma list as one value.
#[derive(Clone, Debug)]
struct List(Vec<f64>);

#[derive(Clone, Debug)]
struct Grid(Vec<usize>);

#[derive(Clone, Debug)]
struct Models(Vec<ReferenceModel>);

fn parse_list(s: &str) -> Result<List, String> {
    if s.trim().is_empty() {
        return Ok(List(Vec::new()));
    }
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad number {t:?}")))
        .collect::<Result<_, _>>()
        .map(List)
}

fn parse_models(s: &str) -> Result<Models, String> {
    s.split(',')
        .map(|t| t.parse().map_err(|e: br_ar::Error| e.to_string()))
        .collect::<Result<_, _>>()
        .map(Models)
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got {s:?}"))?;
    let lo = a.trim().parse().map_err(|_| format!("bad number {a:?}"))?;
    let hi = b.trim().parse().map_err(|_| format!("bad number {b:?}"))?;
    Ok((lo, hi))
}

fn parse_grid_arg(s: &str) -> Result<Grid, String> {
    parse_grid(s).map(Grid).map_err(|e| e.to_string())
}

#[derive(Args)]
struct ModelArgs {
    /// Reference model m0..m5.
    #[arg(long, default_value = "m0", conflicts_with = "theta")]
    model: ReferenceModel,
    /// Explicit coefficients θ1,…,θp.
    #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
    theta: Option<List>,
    /// Number of observations.
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Initial values X_0,…,X_{-p+1} (default zero).
    #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
    phi0: Option<List>,
}

impl ModelArgs {
    fn spec(&self) -> br_ar::Result<ModelSpec> {
        Ok(match &self.theta {
            Some(t) => ModelSpec::Theta(ArModel::new(t.0.clone())?),
            None => ModelSpec::Alias(self.model),
        })
    }

    fn simulate(&self, noise: NoiseSpec) -> br_ar::Result<SimulateConfig> {
        Ok(SimulateConfig {
            model: self.spec()?,
            noise,
            n: self.n,
            seed: self.seed,
            phi0: self.phi0.clone().map(|l| l.0),
        })
    }
}

#[derive(Args)]
struct TestOpts {
    /// Null density, e.g. normal:0,1, student:5, laplace:1.
    #[arg(long, default_value = "normal:0,1")]
    f0: NoiseSpec,
    /// gaussian, uniform[:taper] or exponential.
    #[arg(long, default_value = "gaussian")]
    kernel: KernelSpec,
    #[arg(long, default_value_t = 0.14)]
    h0: f64,
    /// Bandwidth exponent: h = h0 n^-kappa.
    #[arg(long, default_value_t = DEFAULT_KAPPA)]
    kappa: f64,
    #[arg(long, default_value_t = 2.0)]
    delta: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Also run the Kolmogorov-Smirnov test.
    #[arg(long)]
    ks: bool,
}

impl TestOpts {
    fn config(&self) -> br_ar::Result<TestConfig> {
        Ok(TestConfig {
            delta: self.delta,
            alpha: self.alpha,
            kernel: self.kernel,
            bandwidth: Bandwidth::new(self.h0, self.kappa)?,
            f0: self.f0,
            ks_baseline: self.ks,
        })
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Innovation distribution.
    #[arg(long, default_value = "normal:0,1")]
    noise: NoiseSpec,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value = "normal:0,1")]
    noise: NoiseSpec,
    /// Read observations from a file (whitespace or comma separated)
    /// instead of simulating; the first `order` values are the presample.
    #[arg(long, requires = "order")]
    input: Option<PathBuf>,
    /// AR order to fit to `--input`.
    #[arg(long)]
    order: Option<usize>,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    test: TestOpts,
    /// True innovation distribution (default: f0).
    #[arg(long)]
    noise: Option<NoiseSpec>,
    /// Grid points of the density plot data.
    #[arg(long, default_value_t = 201)]
    plot_points: usize,
}

#[derive(Args)]
struct McOpts {
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    /// Retries per replication after overflow or a singular fit.
    #[arg(long, default_value_t = DEFAULT_RETRY_LIMIT)]
    retry_limit: u32,
}

#[derive(Args)]
struct LevelArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    test: TestOpts,
    #[command(flatten)]
    mc: McOpts,
    /// Keep every replication's z in the output.
    #[arg(long)]
    dump_z: bool,
}

#[derive(Args)]
struct PowerArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    test: TestOpts,
    #[command(flatten)]
    mc: McOpts,
    /// mean (N(m,1)) or variance (N(0,σ²)).
    #[arg(long, value_parser = parse_sweep)]
    sweep: Option<SweepKind>,
    /// Sweep parameters, comma separated.
    #[arg(long, value_parser = parse_list, allow_hyphen_values = true, requires = "sweep")]
    params: Option<List>,
    /// Additional alternative densities (repeatable).
    #[arg(long = "alt")]
    alternatives: Vec<NoiseSpec>,
}

fn parse_sweep(s: &str) -> Result<SweepKind, String> {
    match s {
        "mean" => Ok(SweepKind::Mean),
        "variance" | "var" => Ok(SweepKind::Variance),
        _ => Err(format!("unknown sweep {s:?} (mean or variance)")),
    }
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long, default_value_t = 0.05)]
    target: f64,
    #[arg(long, default_value = "gaussian")]
    kernel: KernelSpec,
    #[arg(long, default_value_t = DEFAULT_KAPPA)]
    kappa: f64,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// h0 search interval lo:hi.
    #[arg(long, value_parser = parse_range, default_value = "0.05:0.5")]
    range: (f64, f64),
    #[arg(long, default_value_t = 9)]
    grid: usize,
    #[arg(long, default_value_t = 0.005)]
    tolerance: f64,
    #[arg(long, default_value_t = 2.0)]
    delta: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value = "normal:0,1")]
    f0: NoiseSpec,
}

#[derive(Args)]
struct RateArgs {
    /// Catalogue entry, or `all`.
    #[arg(long, default_value = "all")]
    quantity: String,
    /// lo:hi for powers of two, or a comma list.
    #[arg(long, value_parser = parse_grid_arg)]
    ngrid: Option<Grid>,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.15)]
    tolerance: f64,
}

#[derive(Args)]
struct WienerArgs {
    #[arg(long, default_value_t = 100_000)]
    reps: usize,
    #[arg(long, default_value_t = WIENER_DEFAULT_STEPS)]
    steps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct Table1Args {
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_KAPPA)]
    kappa: f64,
    /// Subset of models, comma separated.
    #[arg(long, value_parser = parse_models)]
    models: Option<Models>,
    #[arg(long, default_value_t = DEFAULT_RETRY_LIMIT)]
    retry_limit: u32,
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<br_ar::Error> for Failure {
    fn from(e: br_ar::Error) -> Self {
        if e.is_config_error() {
            Failure::Config(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

fn read_series(path: &PathBuf) -> Result<Vec<f64>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| Failure::Config(format!("{}: bad number {t:?}", path.display()))))
        .collect()
}

fn build(command: Command) -> Result<Experiment, Failure> {
    Ok(match command {
        Command::Simulate(a) => Experiment::Simulate(a.model.simulate(a.noise)?),
        Command::Estimate(a) => match a.input {
            Some(path) => Experiment::Estimate(EstimateConfig {
                simulate: None,
                data: Some(DataInput {
                    values: read_series(&path)?,
                    order: a.order.unwrap_or(0),
                }),
            }),
            None => Experiment::Estimate(EstimateConfig {
                simulate: Some(a.model.simulate(a.noise)?),
                data: None,
            }),
        },
        Command::Test(a) => {
            let test = a.test.config()?;
            Experiment::Test(TestRunConfig {
                simulate: a.model.simulate(a.noise.unwrap_or(test.f0))?,
                test,
                plot_points: a.plot_points,
            })
        }
        Command::Level(a) => {
            let test = a.test.config()?;
            Experiment::Level(McConfig {
                model: a.model.spec()?,
                noise: test.f0,
                test,
                n: a.model.n,
                reps: a.mc.reps,
                seed: a.model.seed,
                retry_limit: a.mc.retry_limit,
                phi0: a.model.phi0.clone().map(|l| l.0),
                dump_z: a.dump_z,
            })
        }
        Command::Power(a) => Experiment::Power(PowerConfig {
            model: a.model.spec()?,
            test: a.test.config()?,
            n: a.model.n,
            reps: a.mc.reps,
            seed: a.model.seed,
            retry_limit: a.mc.retry_limit,
            sweep: a.sweep,
            parameters: a.params.map(|l| l.0).unwrap_or_default(),
            alternatives: a.alternatives,
        }),
        Command::Calibrate(a) => Experiment::Calibrate(CalibrateConfig {
            target: a.target,
            kernel: a.kernel,
            kappa: a.kappa,
            n: a.n,
            reps: a.reps,
            seed: a.seed,
            search: CalibrationSearch {
                lo: a.range.0,
                hi: a.range.1,
                grid: a.grid,
                tolerance: a.tolerance,
                max_bisections: 10,
            },
            delta: a.delta,
            alpha: a.alpha,
            f0: a.f0,
        }),
        Command::Ratecheck(a) => Experiment::Ratecheck(RateCheckConfig {
            quantity: match a.quantity.as_str() {
                "all" => None,
                q => Some(q.parse::<RateQuantity>()?),
            },
            n_grid: a.ngrid.map(|g| g.0),
            reps: a.reps,
            seed: a.seed,
            tolerance: a.tolerance,
        }),
        Command::WienerQuantiles(a) => Experiment::WienerQuantiles(WienerConfig {
            reps: a.reps,
            steps: a.steps,
            seed: a.seed,
        }),
        Command::Table1(a) => Experiment::Table1(Table1Config {
            reps: a.reps,
            seed: a.seed,
            kappa: a.kappa,
            delta: 2.0,
            alpha: 0.05,
            retry_limit: a.retry_limit,
            models: a.models.map(|m| m.0).unwrap_or_else(|| ReferenceModel::ALL.to_vec()),
            cells: experiment::table1_cells(),
        }),
        Command::Run { file } => {
            let text =
                std::fs::read_to_string(&file).map_err(|e| Failure::Config(format!("{}: {e}", file.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", file.display())))?
        }
    })
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let exp = build(cli.command)?;
    let outcome = match cli.jobs {
        Some(0) => return Err(Failure::Config("--jobs must be at least 1".into())),
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| Failure::Config(e.to_string()))?
            .install(|| experiment::run(&exp, cli.timing))?,
        None => experiment::run(&exp, cli.timing)?,
    };
    let mut doc = serde_json::to_value(&exp).expect("experiments serialize");
    doc["result"] = outcome.result;
    let io = |e: std::io::Error| Failure::Config(format!("cannot write output: {e}"));
    output::write_json(&doc, cli.out.as_deref()).map_err(io)?;
    if let Some(path) = &cli.csv {
        output::write_csv(&outcome.table, path).map_err(io)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("br-ar: configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("br-ar: numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}
