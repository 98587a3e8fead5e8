//! Bickel-Rosenblatt goodness-of-fit testing for the innovations of
//! autoregressive models.
//!
//! The pipeline runs from [`ar`] (simulation in double-double precision) through
//! [`estimation`] (least squares and residuals) and [`kde`] to the statistics in
//! [`stat`] and the test in [`gof`]. [`montecarlo`] and [`rates`] wrap it in
//! reproducible experiments with one RNG stream per replication.
//!
//! ```
//! use br_ar::ar::simulate;
//! use br_ar::estimation::fit_and_residuals;
//! use br_ar::{br_gof_test, Bandwidth, KernelSpec, NoiseSpec, ReferenceModel, TestConfig};
//!
//! let model = ReferenceModel::M1.model();
//! let series = simulate(&model, &NoiseSpec::STANDARD_NORMAL, 200, None, 7).unwrap();
//! let (_, res) = fit_and_residuals(&series, model.order()).unwrap();
//! let cfg = TestConfig {
//!     delta: 2.0,
//!     alpha: 0.05,
//!     kernel: KernelSpec::Gaussian,
//!     bandwidth: Bandwidth::new(0.14, 0.23).unwrap(),
//!     f0: NoiseSpec::STANDARD_NORMAL,
//!     ks_baseline: false,
//! };
//! let report = br_gof_test(&res, &cfg).unwrap();
//! assert_eq!(report.reject, report.p_value < 0.05);
//! ```

pub mod ar;
pub mod dd;
pub mod error;
pub mod estimation;
pub mod gof;
pub mod kde;
pub mod montecarlo;
pub mod noise;
pub mod par;
pub mod quadrature;
pub mod rates;
pub mod rng;
pub mod special;
pub mod stat;

pub use ar::{ArModel, ReferenceModel, Regime, TimeSeries};
pub use error::{Error, Result};
pub use estimation::{OlsFit, ResidualSet};
pub use gof::{br_gof_test, GofTest, TestConfig, TestReport};
pub use kde::{Bandwidth, Kernel, KernelSpec};
pub use montecarlo::{empirical_level, empirical_power, McConfig, McReport, ModelSpec};
pub use noise::NoiseSpec;
pub use stat::{BrReport, StatisticKind, WeightFn};
