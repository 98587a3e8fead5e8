//! Least-squares fitting of AR coefficients and the residual process.
//!
//! The regression `X_t = θᵀ Φ_{t-1} + ε_t` is solved through a Householder
//! QR factorization of the `n × p` regressor matrix, never through the
//! normal equations. The solution is then refined twice against residuals
//! evaluated in double-double arithmetic, which keeps explosive fits (where
//! `θ̂ - θ` shrinks geometrically) accurate beyond plain `f64` precision.

use nalgebra::{DMatrix, DVector};

use crate::ar::TimeSeries;
use crate::dd::Dd;
use crate::error::{Error, Result};

/// Fits whose regressor condition number exceeds this are rejected.
pub const MAX_CONDITION: f64 = 1e15;

/// Residuals whose rounding floor exceeds this fraction of their scale are
/// rejected as numerically meaningless.
pub const PRECISION_LOSS_RATIO: f64 = 1e-6;

/// Rounding floors below this are never reported, whatever the residual scale.
const ABSOLUTE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub theta_hat: Vec<f64>,
    /// Low-order parts of the refined estimate.
    theta_tail: Vec<f64>,
    /// `Σ Φ_{t-1} Φ_{t-1}ᵀ`.
    pub gram: DMatrix<f64>,
    /// 2-norm condition number of the regressor matrix.
    pub condition_estimate: f64,
}

impl OlsFit {
    pub fn order(&self) -> usize {
        self.theta_hat.len()
    }

    fn theta_dd(&self) -> Vec<Dd> {
        self.theta_hat
            .iter()
            .zip(&self.theta_tail)
            .map(|(&h, &l)| Dd::new(h, l))
            .collect()
    }
}

/// The residual process `ε̂_1, …, ε̂_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSet {
    values: Vec<f64>,
}

impl ResidualSet {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Shape("residual set is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("residuals must be finite".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_order(series: &TimeSeries, p: usize) -> Result<()> {
    if series.presample_len() != p {
        return Err(Error::Shape(format!(
            "series carries {} pre-sample values, model order is {p}",
            series.presample_len()
        )));
    }
    Ok(())
}

/// `X_t - θᵀ Φ_{t-1}` in double-double for `t = 1..=n`.
fn dd_residuals(series: &TimeSeries, theta: &[Dd]) -> Vec<Dd> {
    let p = theta.len();
    (0..series.n())
        .map(|t| {
            let idx = p + t;
            let mut acc = series.at_dd(idx);
            for (i, th) in theta.iter().enumerate() {
                acc = acc - series.at_dd(idx - 1 - i) * *th;
            }
            acc
        })
        .collect()
}

/// Least-squares estimate of an AR(p) coefficient vector.
pub fn ols_estimate(series: &TimeSeries, p: usize) -> Result<OlsFit> {
    if p == 0 {
        return Err(Error::NeutralModel);
    }
    check_order(series, p)?;
    let n = series.n();
    if n <= p {
        return Err(Error::Shape(format!("need n > p, got n = {n}, p = {p}")));
    }
    let values = series.values();
    let design = DMatrix::from_fn(n, p, |t, j| values[p + t - 1 - j]);
    let target = DVector::from_fn(n, |t, _| values[p + t]);

    let gram = design.transpose() * &design;

    let qr = design.clone().qr();
    let r = qr.r();
    let sv = r.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::SingularFit { condition });
    }
    let q = qr.q();
    let solve = |rhs: &DVector<f64>| -> Result<DVector<f64>> {
        let qtb = q.transpose() * rhs;
        r.solve_upper_triangular(&qtb)
            .ok_or(Error::SingularFit { condition })
    };

    let first = solve(&target)?;
    let mut theta: Vec<Dd> = first.iter().map(|&v| Dd::from_f64(v)).collect();
    for _ in 0..2 {
        let res = dd_residuals(series, &theta);
        let rhs = DVector::from_iterator(n, res.iter().map(|d| d.to_f64()));
        let delta = solve(&rhs)?;
        for (th, d) in theta.iter_mut().zip(delta.iter()) {
            *th = th.add_f64(*d);
        }
    }
    if theta.iter().any(|t| !t.hi.is_finite()) {
        return Err(Error::SingularFit { condition });
    }
    Ok(OlsFit {
        theta_hat: theta.iter().map(|d| d.hi).collect(),
        theta_tail: theta.iter().map(|d| d.lo).collect(),
        gram,
        condition_estimate: condition,
    })
}

fn finish(series: &TimeSeries, theta: &[Dd]) -> Result<ResidualSet> {
    let res: Vec<f64> = dd_residuals(series, theta).iter().map(|d| d.to_f64()).collect();
    if !theta.is_empty() {
        let max_abs = series.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let coef: f64 = 1.0 + theta.iter().map(|t| t.hi.abs()).sum::<f64>();
        let floor = max_abs * coef * 2f64.powi(-104);
        let scale = (res.iter().map(|e| e * e).sum::<f64>() / res.len() as f64).sqrt();
        if floor > PRECISION_LOSS_RATIO * scale && floor > ABSOLUTE_FLOOR {
            return Err(Error::PrecisionLoss { floor });
        }
    }
    ResidualSet::new(res)
}

/// Residuals `ε̂_t = X_t - θ̂ᵀ Φ_{t-1}`; for `p = 0` the observations themselves.
pub fn residuals(series: &TimeSeries, theta_hat: &[f64]) -> Result<ResidualSet> {
    check_order(series, theta_hat.len())?;
    if theta_hat.is_empty() {
        return ResidualSet::new(series.observations().to_vec());
    }
    let theta: Vec<Dd> = theta_hat.iter().map(|&t| Dd::from_f64(t)).collect();
    finish(series, &theta)
}

/// Residuals of a fit, using the refined double-double estimate.
pub fn fit_residuals(series: &TimeSeries, fit: &OlsFit) -> Result<ResidualSet> {
    check_order(series, fit.order())?;
    finish(series, &fit.theta_dd())
}

/// Fits an AR(p) model (or none for `p = 0`) and returns its residuals.
pub fn fit_and_residuals(series: &TimeSeries, p: usize) -> Result<(Option<OlsFit>, ResidualSet)> {
    if p == 0 {
        return Ok((None, residuals(series, &[])?));
    }
    let fit = ols_estimate(series, p)?;
    let res = fit_residuals(series, &fit)?;
    Ok((Some(fit), res))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ar::{simulate, simulate_with_innovations, ArModel, ReferenceModel};
    use crate::noise::NoiseSpec;

    #[test]
    fn noiseless_ar1_is_recovered_exactly() {
        let m = ArModel::new(vec![0.5]).unwrap();
        let s = simulate_with_innovations(&m, &vec![0.0; 50], Some(&[1.0])).unwrap();
        let fit = ols_estimate(&s, 1).unwrap();
        assert!((fit.theta_hat[0] - 0.5).abs() < 1e-12);
        let res = fit_residuals(&s, &fit).unwrap();
        assert!(res.values().iter().all(|e| e.abs() < 1e-12));
    }

    #[test]
    fn noiseless_ar2_is_recovered() {
        let m = ArModel::new(vec![0.3, 0.2]).unwrap();
        let s = simulate_with_innovations(&m, &vec![0.0; 60], Some(&[1.0, 2.0])).unwrap();
        let fit = ols_estimate(&s, 2).unwrap();
        assert!((fit.theta_hat[0] - 0.3).abs() < 1e-10);
        assert!((fit.theta_hat[1] - 0.2).abs() < 1e-10);
    }

    #[test]
    fn true_theta_returns_the_innovations() {
        let m = ReferenceModel::M1.model();
        let eps: Vec<f64> = (0..40).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect();
        let s = simulate_with_innovations(&m, &eps, None).unwrap();
        let res = residuals(&s, m.theta()).unwrap();
        for (a, b) in res.values().iter().zip(&eps) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn neutral_residuals_are_the_series() {
        let s = simulate(&ArModel::neutral(), &NoiseSpec::STANDARD_NORMAL, 30, None, 1).unwrap();
        let res = residuals(&s, &[]).unwrap();
        assert_eq!(res.values(), s.observations());
        assert_eq!(ols_estimate(&s, 0), Err(Error::NeutralModel));
    }

    #[test]
    fn residuals_are_orthogonal_to_regressors() {
        for m in [ReferenceModel::M1, ReferenceModel::M3, ReferenceModel::M5] {
            let model = m.model();
            let p = model.order();
            let s = simulate(&model, &NoiseSpec::STANDARD_NORMAL, 300, None, 9).unwrap();
            let fit = ols_estimate(&s, p).unwrap();
            let res = fit_residuals(&s, &fit).unwrap();
            for j in 0..p {
                let mut dot = Dd::ZERO;
                let mut scale = 0.0;
                for t in 0..s.n() {
                    let x = s.at_dd(p + t - 1 - j);
                    dot = dot + x.mul_f64(res.values()[t]);
                    scale += (x.to_f64() * res.values()[t]).abs();
                }
                assert!(dot.to_f64().abs() <= 1e-8 * scale, "{m} lag {j}: {}", dot.to_f64());
            }
        }
    }

    #[test]
    fn explosive_fit_stays_accurate_at_n500() {
        let model = ReferenceModel::M5.model();
        let s = simulate(&model, &NoiseSpec::STANDARD_NORMAL, 500, None, 5).unwrap();
        assert!(s.observations().iter().any(|x| x.abs() > 1e18));
        let (fit, res) = fit_and_residuals(&s, 2).unwrap();
        let fit = fit.unwrap();
        // In plain f64 the late residuals would be rounding noise of size ~1e4.
        let ms = res.values().iter().map(|e| e * e).sum::<f64>() / 500.0;
        assert!((0.7..1.3).contains(&ms), "mean square {ms}");
        for j in 0..2 {
            let mut dot = Dd::ZERO;
            let mut scale = 0.0;
            for t in 0..s.n() {
                let x = s.at_dd(2 + t - 1 - j);
                dot = dot + x.mul_f64(res.values()[t]);
                scale += (x.to_f64() * res.values()[t]).abs();
            }
            assert!(dot.to_f64().abs() <= 1e-8 * scale);
        }
        assert!((fit.theta_hat[1] - 1.21).abs() < 1e-12);
    }

    #[test]
    fn precision_loss_is_detected_far_out() {
        let model = ReferenceModel::M5.model();
        let s = simulate(&model, &NoiseSpec::STANDARD_NORMAL, 900, None, 5).unwrap();
        let r = fit_and_residuals(&s, 2);
        assert!(matches!(r, Err(Error::PrecisionLoss { .. })), "{r:?}");
        assert!(r.unwrap_err().is_retryable());
    }

    #[test]
    fn order_mismatch_is_a_shape_error() {
        let s = simulate(&ReferenceModel::M2.model(), &NoiseSpec::STANDARD_NORMAL, 20, None, 1).unwrap();
        assert!(matches!(residuals(&s, &[0.5, 0.1]), Err(Error::Shape(_))));
        assert!(matches!(ols_estimate(&s, 2), Err(Error::Shape(_))));
    }

    #[test]
    fn constant_regressors_are_singular() {
        let s = TimeSeries::new(vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 2).unwrap();
        assert!(matches!(ols_estimate(&s, 2), Err(Error::SingularFit { .. })));
    }
}
