//! Autoregressive models, their spectral classification and simulation.
//!
//! A model of order `p` is `X_t = θ₁ X_{t-1} + … + θ_p X_{t-p} + ε_t`. Its
//! regime is read off the moduli of the companion-matrix eigenvalues, which
//! are the reciprocals of the zeros of `Θ(z) = 1 - θ₁ z - … - θ_p z^p`.
//!
//! Pre-sample vectors follow the state convention `Φ_t = (X_t, …, X_{t-p+1})`,
//! so `phi0[0]` is `X_0` and `phi0[p-1]` is `X_{-p+1}`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Complex, DMatrix, Schur};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dd::Dd;
use crate::error::{invalid, Error, Result};
use crate::noise::NoiseSpec;
use crate::rng;

/// Band around 1 used when comparing eigenvalue moduli.
pub const DEFAULT_MODULUS_TOL: f64 = 1e-8;

/// Trajectories are abandoned once a value exceeds this magnitude.
pub const OVERFLOW_GUARD: f64 = 1e300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Neutral,
    Stable,
    PurelyUnstable,
    SeasonalUnstable,
    PurelyExplosive,
    Mixed,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Regime::Neutral => "neutral",
            Regime::Stable => "stable",
            Regime::PurelyUnstable => "purely-unstable",
            Regime::SeasonalUnstable => "seasonal-unstable",
            Regime::PurelyExplosive => "purely-explosive",
            Regime::Mixed => "mixed",
        };
        f.write_str(s)
    }
}

/// An AR(p) coefficient vector. `θ_p ≠ 0` whenever `p > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ArModel {
    theta: Vec<f64>,
}

impl TryFrom<Vec<f64>> for ArModel {
    type Error = Error;
    fn try_from(theta: Vec<f64>) -> Result<Self> {
        ArModel::new(theta)
    }
}

impl From<ArModel> for Vec<f64> {
    fn from(m: ArModel) -> Self {
        m.theta
    }
}

impl ArModel {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(invalid("AR coefficients must be finite"));
        }
        if let Some(&last) = theta.last() {
            if last == 0.0 {
                return Err(Error::DegreeDeficient);
            }
        }
        Ok(Self { theta })
    }

    pub fn neutral() -> Self {
        Self { theta: Vec::new() }
    }

    /// Seasonal unstable model `Θ(z) = 1 - z^s`.
    pub fn seasonal(s: usize) -> Result<Self> {
        if s < 2 {
            return Err(invalid("season must be at least 2"));
        }
        let mut theta = vec![0.0; s];
        theta[s - 1] = 1.0;
        Self::new(theta)
    }

    pub fn order(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn companion_matrix(&self) -> Result<DMatrix<f64>> {
        let p = self.order();
        if p == 0 {
            return Err(Error::NeutralModel);
        }
        let mut c = DMatrix::zeros(p, p);
        for (j, &t) in self.theta.iter().enumerate() {
            c[(0, j)] = t;
        }
        for i in 1..p {
            c[(i, i - 1)] = 1.0;
        }
        Ok(c)
    }

    /// Companion eigenvalues ordered by decreasing modulus.
    pub fn eigenvalues(&self) -> Result<Vec<Complex<f64>>> {
        let c = self.companion_matrix()?;
        let p = c.nrows();
        let schur = Schur::try_new(c, f64::EPSILON, 10_000).ok_or_else(|| Error::EigenNonConvergence {
            dim: p,
            theta: self.theta.clone(),
        })?;
        let mut ev: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.re.total_cmp(&a.re)));
        Ok(ev)
    }

    pub fn classify(&self, tol: f64) -> Result<Regime> {
        if !(tol > 0.0) {
            return Err(invalid("modulus tolerance must be positive"));
        }
        if self.order() == 0 {
            return Ok(Regime::Neutral);
        }
        let moduli: Vec<f64> = self.eigenvalues()?.iter().map(|z| z.norm()).collect();
        let largest = moduli[0];
        let smallest = moduli[moduli.len() - 1];
        Ok(if largest < 1.0 - tol {
            Regime::Stable
        } else if smallest > 1.0 + tol {
            Regime::PurelyExplosive
        } else if moduli.iter().all(|m| (m - 1.0).abs() <= tol) {
            if self.is_seasonal() {
                Regime::SeasonalUnstable
            } else {
                Regime::PurelyUnstable
            }
        } else {
            Regime::Mixed
        })
    }

    pub fn regime(&self) -> Result<Regime> {
        self.classify(DEFAULT_MODULUS_TOL)
    }

    fn is_seasonal(&self) -> bool {
        let p = self.order();
        p >= 2 && self.theta[..p - 1].iter().all(|&t| t == 0.0) && self.theta[p - 1] == 1.0
    }

    /// Zeros of `Θ(z)`, the reciprocals of the companion eigenvalues.
    pub fn char_poly_roots(&self) -> Result<Vec<Complex<f64>>> {
        if self.order() == 0 {
            return Err(Error::NeutralModel);
        }
        Ok(self.eigenvalues()?.into_iter().map(|l| l.inv()).collect())
    }
}

impl fmt::Display for ArModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.theta.iter().map(|t| t.to_string()).collect();
        write!(f, "AR({})[{}]", self.order(), parts.join(","))
    }
}

/// The six reference models of the level and power study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceModel {
    M0,
    M1,
    M2,
    M3,
    M4,
    M5,
}

impl ReferenceModel {
    pub const ALL: [ReferenceModel; 6] = [
        ReferenceModel::M0,
        ReferenceModel::M1,
        ReferenceModel::M2,
        ReferenceModel::M3,
        ReferenceModel::M4,
        ReferenceModel::M5,
    ];

    pub fn model(self) -> ArModel {
        let theta = match self {
            ReferenceModel::M0 => vec![],
            ReferenceModel::M1 => vec![-1.0 / 12.0, 5.0 / 24.0, 1.0 / 24.0],
            ReferenceModel::M2 => vec![0.99],
            ReferenceModel::M3 => vec![-1.0],
            ReferenceModel::M4 => vec![1.0],
            ReferenceModel::M5 => vec![0.0, 1.21],
        };
        ArModel::new(theta).expect("reference models are valid")
    }

    pub fn label(self) -> &'static str {
        match self {
            ReferenceModel::M0 => "m0",
            ReferenceModel::M1 => "m1",
            ReferenceModel::M2 => "m2",
            ReferenceModel::M3 => "m3",
            ReferenceModel::M4 => "m4",
            ReferenceModel::M5 => "m5",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ReferenceModel::M0 => "neutral (p = 0)",
            ReferenceModel::M1 => "stable AR(3)",
            ReferenceModel::M2 => "stable, nearly unstable AR(1)",
            ReferenceModel::M3 => "unstable AR(1), root -1",
            ReferenceModel::M4 => "unstable AR(1), root 1",
            ReferenceModel::M5 => "explosive AR(2)",
        }
    }
}

impl FromStr for ReferenceModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ReferenceModel::ALL
            .into_iter()
            .find(|m| m.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| invalid(format!("unknown model alias {s:?} (expected m0..m5)")))
    }
}

impl fmt::Display for ReferenceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Observations `X_{-p+1}, …, X_0, X_1, …, X_n` in chronological order.
///
/// `tails` holds the low-order parts of a double-double trajectory and is
/// zero for data that did not come from [`simulate`].
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    tails: Vec<f64>,
    p: usize,
}

impl TimeSeries {
    /// Builds a series from `p` pre-sample values followed by the observations.
    pub fn new(values: Vec<f64>, p: usize) -> Result<Self> {
        if values.len() <= p {
            return Err(Error::Shape(format!(
                "series of length {} has no observations after {p} pre-sample values",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("series values must be finite"));
        }
        let tails = vec![0.0; values.len()];
        Ok(Self { values, tails, p })
    }

    pub fn presample_len(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.values.len() - self.p
    }

    /// All values, pre-sample first.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `X_1, …, X_n`.
    pub fn observations(&self) -> &[f64] {
        &self.values[self.p..]
    }

    /// `X_t` for `-p < t ≤ n`.
    pub fn at(&self, t: isize) -> f64 {
        self.values[(t + self.p as isize - 1) as usize]
    }

    pub(crate) fn at_dd(&self, idx: usize) -> Dd {
        Dd::new(self.values[idx], self.tails[idx])
    }

    /// Re-interprets the series with a different number of pre-sample values.
    /// Used to fit a higher-order model on data simulated with a lower one.
    pub fn with_presample(mut self, p: usize) -> Result<Self> {
        if self.values.len() <= p {
            return Err(Error::Shape(format!("series too short for {p} pre-sample values")));
        }
        self.p = p;
        Ok(self)
    }
}

/// Runs the recursion on given innovations. `innovations[t-1]` is `ε_t`.
pub fn simulate_with_innovations(
    model: &ArModel,
    innovations: &[f64],
    phi0: Option<&[f64]>,
) -> Result<TimeSeries> {
    let p = model.order();
    let n = innovations.len();
    if n == 0 {
        return Err(invalid("need at least one observation"));
    }
    let start: Vec<f64> = match phi0 {
        Some(v) if v.len() != p => {
            return Err(Error::Shape(format!(
                "initial vector has length {}, model order is {p}",
                v.len()
            )))
        }
        Some(v) => {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(invalid("initial vector must be finite"));
            }
            v.iter().rev().copied().collect()
        }
        None => vec![0.0; p],
    };
    let mut state: Vec<Dd> = start.iter().copied().map(Dd::from_f64).collect();
    state.reserve(n);
    let theta = model.theta();
    for (t, &eps) in innovations.iter().enumerate() {
        let idx = p + t;
        let mut acc = Dd::from_f64(0.0);
        for (i, &th) in theta.iter().enumerate() {
            if th != 0.0 {
                acc = acc + state[idx - 1 - i].mul_f64(th);
            }
        }
        let x = acc.add_f64(eps);
        let v = x.to_f64();
        if !v.is_finite() || v.abs() > OVERFLOW_GUARD {
            return Err(Error::Overflow {
                index: t + 1,
                value: v,
            });
        }
        state.push(x);
    }
    Ok(TimeSeries {
        values: state.iter().map(|d| d.hi).collect(),
        tails: state.iter().map(|d| d.lo).collect(),
        p,
    })
}

/// Simulates `n` observations with innovations drawn from `noise`.
pub fn simulate_with_rng<R: Rng + ?Sized>(
    model: &ArModel,
    noise: &NoiseSpec,
    n: usize,
    phi0: Option<&[f64]>,
    rng: &mut R,
) -> Result<TimeSeries> {
    let noise = noise.validated()?;
    let mut eps = vec![0.0; n];
    noise.fill(rng, &mut eps);
    simulate_with_innovations(model, &eps, phi0)
}

/// Simulates `n` observations from a seed.
pub fn simulate(
    model: &ArModel,
    noise: &NoiseSpec,
    n: usize,
    phi0: Option<&[f64]>,
    seed: u64,
) -> Result<TimeSeries> {
    simulate_with_rng(model, noise, n, phi0, &mut rng::seeded(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(theta: &[f64]) -> ArModel {
        ArModel::new(theta.to_vec()).unwrap()
    }

    #[test]
    fn companion_layout() {
        assert_eq!(model(&[0.99]).companion_matrix().unwrap(), DMatrix::from_row_slice(1, 1, &[0.99]));
        assert_eq!(
            model(&[0.0, 1.21]).companion_matrix().unwrap(),
            DMatrix::from_row_slice(2, 2, &[0.0, 1.21, 1.0, 0.0])
        );
        let m1 = ReferenceModel::M1.model();
        assert_eq!(
            m1.companion_matrix().unwrap(),
            DMatrix::from_row_slice(
                3,
                3,
                &[-1.0 / 12.0, 5.0 / 24.0, 1.0 / 24.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]
            )
        );
        assert_eq!(ArModel::neutral().companion_matrix(), Err(Error::NeutralModel));
    }

    #[test]
    fn rejects_trailing_zero() {
        assert_eq!(ArModel::new(vec![0.5, 0.0]), Err(Error::DegreeDeficient));
        assert!(ArModel::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn classifies_reference_models() {
        use ReferenceModel::*;
        let expect = [
            (M0, Regime::Neutral),
            (M1, Regime::Stable),
            (M2, Regime::Stable),
            (M3, Regime::PurelyUnstable),
            (M4, Regime::PurelyUnstable),
            (M5, Regime::PurelyExplosive),
        ];
        for (m, r) in expect {
            assert_eq!(m.model().regime().unwrap(), r, "{m}");
        }
        assert_eq!(ArModel::seasonal(4).unwrap().regime().unwrap(), Regime::SeasonalUnstable);
        assert_eq!(model(&[-1.0]).regime().unwrap(), Regime::PurelyUnstable);
        // Roots 0.5 and 2.
        assert_eq!(model(&[2.5, -1.0]).regime().unwrap(), Regime::Mixed);
        assert!(model(&[0.5]).classify(0.0).is_err());
    }

    #[test]
    fn explosive_eigenvalues() {
        let ev = model(&[0.0, 1.21]).eigenvalues().unwrap();
        let mut re: Vec<f64> = ev.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] + 1.1).abs() < 1e-12 && (re[1] - 1.1).abs() < 1e-12);
        assert!(ev.iter().all(|z| z.im.abs() < 1e-12));
    }

    #[test]
    fn simple_roots() {
        let r = model(&[1.0]).char_poly_roots().unwrap();
        assert!((r[0] - Complex::new(1.0, 0.0)).norm() < 1e-14);
        let r = model(&[0.5]).char_poly_roots().unwrap();
        assert!((r[0] - Complex::new(2.0, 0.0)).norm() < 1e-14);
        let r = ArModel::seasonal(4).unwrap().char_poly_roots().unwrap();
        for target in [
            Complex::new(1.0, 0.0),
            Complex::new(0.0, 1.0),
            Complex::new(-1.0, 0.0),
            Complex::new(0.0, -1.0),
        ] {
            assert!(r.iter().any(|z| (z - target).norm() < 1e-10), "{target}");
        }
    }

    #[test]
    fn noiseless_recursions() {
        let zeros = vec![0.0; 20];
        let s = simulate_with_innovations(&model(&[1.0]), &zeros, Some(&[0.0])).unwrap();
        assert!(s.observations().iter().all(|&x| x == 0.0));
        let s = simulate_with_innovations(&model(&[0.5]), &zeros, Some(&[1.0])).unwrap();
        for (t, &x) in s.observations().iter().enumerate() {
            assert_eq!(x, 0.5f64.powi(t as i32 + 1));
        }
        assert_eq!(s.at(0), 1.0);
    }

    #[test]
    fn presample_order_follows_state_vector() {
        // phi0 = (X_0, X_{-1}).
        let s = simulate_with_innovations(&model(&[0.0, 1.0]), &[0.0, 0.0], Some(&[3.0, 7.0])).unwrap();
        assert_eq!(s.values(), &[7.0, 3.0, 7.0, 3.0]);
        assert_eq!(s.at(-1), 7.0);
        assert!(simulate_with_innovations(&model(&[0.5]), &[0.0], Some(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn overflow_reports_first_index() {
        let eps = vec![1.0; 5000];
        match simulate_with_innovations(&model(&[2.0]), &eps, None) {
            Err(Error::Overflow { index, .. }) => assert!((990..1000).contains(&index), "{index}"),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn seeded_simulation_is_deterministic() {
        let m = ReferenceModel::M1.model();
        let a = simulate(&m, &NoiseSpec::STANDARD_NORMAL, 200, None, 42).unwrap();
        let b = simulate(&m, &NoiseSpec::STANDARD_NORMAL, 200, None, 42).unwrap();
        let c = simulate(&m, &NoiseSpec::STANDARD_NORMAL, 200, None, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.n(), 200);
        assert_eq!(a.values().len(), 203);
    }

    #[test]
    fn model_aliases_parse() {
        assert_eq!("M3".parse::<ReferenceModel>().unwrap(), ReferenceModel::M3);
        assert!("m9".parse::<ReferenceModel>().is_err());
    }
}
