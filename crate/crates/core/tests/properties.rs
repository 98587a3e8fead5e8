use br_ar::ar::simulate;
use br_ar::estimation::{fit_residuals, ols_estimate};
use br_ar::gof::{ks_test, wiener_functional_path};
use br_ar::kde::{Bandwidth, KernelDensity, KernelSpec};
use br_ar::montecarlo::{binomial_stderr, empirical_level, McConfig};
use br_ar::quadrature::{integrate_with_breaks, QuadConfig};
use br_ar::special::{normal_cdf, normal_quantile};
use br_ar::stat::{centering_mu, t_hat, t_tilde, variance_tau2, WeightFn};
use br_ar::{br_gof_test, ArModel, Kernel, NoiseSpec, ReferenceModel, ResidualSet, TestConfig};
use nalgebra::Complex;
use proptest::prelude::*;

// Durand-Kerner iteration on the monic reversed polynomial
// z^p - θ1 z^(p-1) - … - θp, whose roots are the reciprocals of the roots of Θ.
fn reciprocal_roots(theta: &[f64]) -> Vec<Complex<f64>> {
    let p = theta.len();
    let eval = |z: Complex<f64>| {
        let mut acc = Complex::new(1.0, 0.0);
        for &t in theta {
            acc = acc * z - t;
        }
        acc
    };
    let mut z: Vec<Complex<f64>> = (0..p).map(|k| Complex::new(0.4, 0.9).powu(k as u32)).collect();
    for _ in 0..2000 {
        let mut moved: f64 = 0.0;
        for i in 0..p {
            let mut den = Complex::new(1.0, 0.0);
            for j in 0..p {
                if j != i {
                    den *= z[i] - z[j];
                }
            }
            let step = eval(z[i]) / den;
            z[i] -= step;
            moved = moved.max(step.norm());
        }
        if moved < 1e-15 {
            break;
        }
    }
    z
}

fn multiset_distance(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|l, r| l.1.total_cmp(&r.1))
            .unwrap();
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

fn theta_strategy() -> impl Strategy<Value = Vec<f64>> {
    (1usize..=4).prop_flat_map(|p| {
        (prop::collection::vec(-0.9f64..0.9, p - 1), prop_oneof![-0.9f64..-0.1, 0.1f64..0.9]).prop_map(|(mut v, last)| {
            v.push(last);
            v
        })
    })
}

fn stable_theta_strategy() -> impl Strategy<Value = Vec<f64>> {
    theta_strategy().prop_filter("stable", |t| {
        let eig = ArModel::new(t.clone()).unwrap().eigenvalues().unwrap();
        eig.iter().all(|z| z.norm() < 0.98)
    })
}

fn residuals_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 2..40)
}

fn kernel_strategy() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![
        Just(KernelSpec::Gaussian),
        Just(KernelSpec::SmoothedUniform { eps_s: 0.05 }),
        Just(KernelSpec::Exponential),
    ]
}

fn null_strategy() -> impl Strategy<Value = NoiseSpec> {
    prop_oneof![
        (0.3f64..3.0).prop_map(|var| NoiseSpec::Normal { mean: 0.0, var }),
        (0.3f64..2.0).prop_map(|b| NoiseSpec::Laplace { b }),
        (2.5f64..30.0).prop_map(|nu| NoiseSpec::Student { nu }),
        (0.3f64..3.0).prop_map(|scale| NoiseSpec::Cauchy { scale }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn companion_eigenvalues_are_reciprocal_roots(theta in theta_strategy()) {
        let model = ArModel::new(theta.clone()).unwrap();
        let eig = model.eigenvalues().unwrap();
        let oracle = reciprocal_roots(&theta);
        prop_assert!(multiset_distance(&eig, &oracle) < 1e-8);
        let inv: Vec<Complex<f64>> = model.char_poly_roots().unwrap().iter().map(|z| z.inv()).collect();
        prop_assert!(multiset_distance(&inv, &oracle) < 1e-8);
    }

    #[test]
    fn simulation_is_deterministic(theta in theta_strategy(), seed in any::<u64>(), n in 1usize..200) {
        let model = ArModel::new(theta).unwrap();
        let a = simulate(&model, &NoiseSpec::STANDARD_NORMAL, n, None, seed);
        let b = simulate(&model, &NoiseSpec::STANDARD_NORMAL, n, None, seed);
        prop_assert_eq!(a.ok(), b.ok());
    }

    #[test]
    fn ols_residuals_are_orthogonal_to_regressors(theta in stable_theta_strategy(), seed in any::<u64>(), n in 30usize..400) {
        let model = ArModel::new(theta).unwrap();
        let series = simulate(&model, &NoiseSpec::STANDARD_NORMAL, n, None, seed).unwrap();
        let p = model.order();
        let fit = ols_estimate(&series, p).unwrap();
        let res = fit_residuals(&series, &fit).unwrap();
        for i in 1..=p {
            let mut dot = 0.0;
            let mut scale = 0.0;
            for t in 1..=n {
                let x = series.at(t as isize - i as isize);
                let e = res.values()[t - 1];
                dot += x * e;
                scale += (x * e).abs();
            }
            prop_assert!(dot.abs() <= 1e-8 * scale.max(1e-300), "lag {i}: {dot} vs {scale}");
        }
    }

    #[test]
    fn density_estimate_is_a_density(res in residuals_strategy(), spec in kernel_strategy(), h in 0.1f64..1.5) {
        let k = Kernel::new(spec).unwrap();
        let kde = KernelDensity::new(&res, &k, h).unwrap();
        let mut breaks = kde.breakpoints();
        breaks.push(-60.0);
        breaks.push(60.0);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let mass = integrate_with_breaks(|x| kde.eval(x), &breaks, &QuadConfig::default()).unwrap().value;
        prop_assert!((mass - 1.0).abs() < 1e-6, "mass {mass}");
        for i in 0..50 {
            let x = -6.0 + 12.0 * i as f64 / 49.0;
            prop_assert!(kde.eval(x) >= 0.0);
        }
        let mut rev = res.clone();
        rev.reverse();
        let other = KernelDensity::new(&rev, &k, h).unwrap();
        prop_assert_eq!(kde.eval(0.3), other.eval(0.3));
    }

    #[test]
    fn statistics_are_nonnegative_and_symmetric(res in residuals_strategy(), spec in kernel_strategy(), h in 0.1f64..1.0, f0 in null_strategy()) {
        let k = Kernel::new(spec).unwrap();
        let a = WeightFn::truncated_reciprocal(f0, 2.0).unwrap();
        let set = ResidualSet::new(res.clone()).unwrap();
        let mut rev = res;
        rev.reverse();
        let rset = ResidualSet::new(rev).unwrap();
        let tt = t_tilde(&set, &k, h, &f0, &a).unwrap();
        prop_assert!(tt >= 0.0);
        prop_assert_eq!(tt, t_tilde(&rset, &k, h, &f0, &a).unwrap());
        let th = t_hat(&set, &k, h, &f0, &a).unwrap();
        prop_assert!(th >= 0.0);
        prop_assert_eq!(th, t_hat(&rset, &k, h, &f0, &a).unwrap());
    }

    #[test]
    fn truncated_weight_moments_do_not_depend_on_the_null(f0 in null_strategy(), g0 in null_strategy(), delta in 0.5f64..3.0) {
        let k = Kernel::gaussian();
        let a = WeightFn::truncated_reciprocal(f0, delta).unwrap();
        let b = WeightFn::truncated_reciprocal(g0, delta).unwrap();
        let (mu_a, mu_b) = (centering_mu(&f0, &a, &k).unwrap(), centering_mu(&g0, &b, &k).unwrap());
        let (t_a, t_b) = (variance_tau2(&f0, &a, &k).unwrap(), variance_tau2(&g0, &b, &k).unwrap());
        prop_assert!((mu_a - mu_b).abs() < 1e-8);
        prop_assert!((t_a - t_b).abs() < 1e-8);
    }

    #[test]
    fn decision_and_p_value_agree(res in prop::collection::vec(-3.0f64..3.0, 5..60), alpha in 0.001f64..0.5, f0 in null_strategy()) {
        let cfg = TestConfig {
            delta: 2.0,
            alpha,
            kernel: KernelSpec::Gaussian,
            bandwidth: Bandwidth::new(0.5, 0.23).unwrap(),
            f0,
            ks_baseline: true,
        };
        let r = br_gof_test(&ResidualSet::new(res).unwrap(), &cfg).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.p_value));
        prop_assert_eq!(r.reject, r.br.z > r.critical_value);
        prop_assert_eq!(r.reject, r.p_value < alpha);
        let ks = r.baseline_ks.unwrap();
        prop_assert!((0.0..=1.0).contains(&ks.p) && (0.0..=1.0).contains(&ks.d));
    }

    #[test]
    fn ks_statistic_matches_brute_force(sample in prop::collection::vec(-4.0f64..4.0, 1..50)) {
        let r = ks_test(&sample, normal_cdf).unwrap();
        let mut s = sample.clone();
        s.sort_by(f64::total_cmp);
        let n = s.len() as f64;
        let mut d: f64 = 0.0;
        for &x in &s {
            // Count ties explicitly instead of relying on the order.
            let below = s.iter().filter(|&&y| y < x).count() as f64;
            let upto = s.iter().filter(|&&y| y <= x).count() as f64;
            let f = normal_cdf(x);
            d = d.max((upto / n - f).abs()).max((f - below / n).abs());
        }
        prop_assert!((r.d - d).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&r.p));
    }

    #[test]
    fn wiener_functional_is_nonnegative(seed in any::<u64>(), path in any::<u64>()) {
        prop_assert!(wiener_functional_path(seed, path, 1000) >= 0.0);
    }
}

#[cfg(feature = "parallel")]
mod threads {
    use super::*;

    proptest! {
        #![proptest_config(ProptestConfig { cases: 8, failure_persistence: None, ..ProptestConfig::default() })]

        #[test]
        fn monte_carlo_reports_ignore_thread_count(seed in any::<u64>(), model in prop::sample::select(ReferenceModel::ALL.to_vec())) {
            let cfg = McConfig {
                model: model.into(),
                noise: NoiseSpec::STANDARD_NORMAL,
                test: TestConfig {
                    delta: 2.0,
                    alpha: 0.05,
                    kernel: KernelSpec::Gaussian,
                    bandwidth: Bandwidth::new(0.14, 0.23).unwrap(),
                    f0: NoiseSpec::STANDARD_NORMAL,
                    ks_baseline: true,
                },
                n: 80,
                reps: 24,
                seed,
                retry_limit: 10,
                phi0: None,
                dump_z: true,
            };
            let run = |threads| {
                rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| empirical_level(&cfg).unwrap())
            };
            let one = run(1);
            prop_assert_eq!(&one, &run(3));
            prop_assert_eq!(one.stderr, binomial_stderr(one.rejection_rate, one.reps_used));
            let rejected = one.z_values.as_ref().unwrap().iter().filter(|&&z| z > normal_quantile(0.95)).count();
            prop_assert_eq!(one.rejection_rate, rejected as f64 / 24.0);
        }
    }
}
