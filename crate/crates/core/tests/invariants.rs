use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

use ebmarg::crossentropy::{CrossEntropy, TrueDistribution};
use ebmarg::gibbs1d::{Cost, SeparableGibbsModel};
use ebmarg::harness::{ExperimentConfig, Suite};
use ebmarg::linmodel::{build_model, GeneralLinearModel, HyperPoint, DEFAULT_RANK_TOL};
use ebmarg::marginal::{abic_value, betaprime_jacobian, log_marginal, log_marginal_fast};
use ebmarg::mmle::{fit_two_hyper, FitOptions};
use ebmarg::problem::{first_difference, format_matrix_csv, parse_matrix_csv, random_gaussian, random_model};
use ebmarg::sampler::{draw_data, draw_model_params, SeedSpec};

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 48,
        ..ProptestConfig::default()
    }
}

/// `(N, M, P)` with `P <= M < N + P`.
fn dims() -> impl Strategy<Value = (usize, usize, usize)> {
    (2usize..9)
        .prop_flat_map(|m| (Just(m), 1..=m))
        .prop_flat_map(|(m, p)| ((m + 1 - p).max(2)..m + 12, Just(m), Just(p)))
}

/// Overdetermined sizes, so the residual pins `beta_d` and the fit is interior.
fn fit_dims() -> impl Strategy<Value = (usize, usize, usize)> {
    (2usize..9)
        .prop_flat_map(|m| (Just(m), 1..=m))
        .prop_flat_map(|(m, p)| (m + 3..m + 20, Just(m), Just(p)))
}

fn instance(seed: u64, (n, m, p): (usize, usize, usize)) -> Option<(GeneralLinearModel, DVector<f64>)> {
    let mut rng = SeedSpec::new(seed, 7).rng();
    let model = random_model(n, m, p, &mut rng).ok()?;
    let beta = HyperPoint::new(rng.random_range(0.3..3.0), rng.random_range(0.3..3.0)).ok()?;
    let a = draw_model_params(&model, beta.beta_a(), 1.0, &mut rng);
    let d = draw_data(&model, &a, beta.beta_d(), &mut rng);
    Some((model, d))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn etilde_rank_is_n_eff(seed in any::<u64>(), nmp in dims(), log_l in -6.0f64..6.0) {
        let Some((model, _)) = instance(seed, nmp) else { return Ok(()) };
        let ops = model.lambda_operators(log_l.exp()).unwrap();
        prop_assert_eq!(ops.etilde_rank(model.rank_tol()), model.n_eff());
    }

    #[test]
    fn weighted_cost_is_the_etilde_quadratic_form(seed in any::<u64>(), nmp in dims(), log_l in -6.0f64..6.0) {
        let Some((model, d)) = instance(seed, nmp) else { return Ok(()) };
        let l = log_l.exp();
        let t = model.profile_terms_dense(&d, l).unwrap();
        let ops = model.lambda_operators(l).unwrap();
        let quad = 0.5 * d.dot(&(&ops.etilde * &d));
        prop_assert!(rel(t.ustar + l * t.vstar, quad) < 1e-8);
    }

    #[test]
    fn j_derivative_is_minus_j_squared(seed in any::<u64>(), nmp in dims(), log_l in -3.0f64..3.0) {
        let Some((model, _)) = instance(seed, nmp) else { return Ok(()) };
        let l = log_l.exp();
        let h = 1e-5 * l;
        let jp = model.lambda_operators(l + h).unwrap().j;
        let jm = model.lambda_operators(l - h).unwrap().j;
        let j = model.lambda_operators(l).unwrap().j;
        let fd = (jp - jm) / (2.0 * h);
        let exact = -(&j * &j);
        prop_assert!((&fd - &exact).norm() <= 1e-5 * exact.norm().max(1e-12));
    }

    #[test]
    fn a_star_minimizes_the_weighted_cost(seed in any::<u64>(), nmp in dims(), log_l in -3.0f64..3.0) {
        let Some((model, d)) = instance(seed, nmp) else { return Ok(()) };
        let l = log_l.exp();
        let ops = model.lambda_operators(l).unwrap();
        let a_star = &ops.cprime * model.project_data(&d);
        let cost = |a: &DVector<f64>| {
            let (u, v) = model.cost_functions(&d, a);
            u + l * v
        };
        let base = cost(&a_star);
        let mut rng = SeedSpec::new(seed, 8).rng();
        for _ in 0..20 {
            let dir = random_gaussian(model.m(), 1, 1.0, &mut rng).column(0).normalize();
            prop_assert!(cost(&(&a_star + dir * 1e-3)) >= base - 1e-12 * base.abs());
        }
    }

    #[test]
    fn gradients_agree_across_coordinates_and_paths(seed in any::<u64>(), nmp in dims(), bd in 0.2f64..5.0, ba in 0.2f64..5.0) {
        let Some((model, d)) = instance(seed, nmp) else { return Ok(()) };
        let beta = HyperPoint::new(bd, ba).unwrap();
        let dense = log_marginal(&model, &d, beta).unwrap();
        let fast = log_marginal_fast(&model, &d, beta).unwrap();
        let chained = betaprime_jacobian(beta) * dense.grad_betaprime;
        prop_assert!((chained - dense.grad_beta).norm() <= 1e-10 * dense.grad_beta.norm().max(1.0));
        prop_assert!((fast.logml - dense.logml).abs() <= 1e-9 * model.n_eff() as f64);
        prop_assert!((fast.grad_beta - dense.grad_beta).norm() <= 1e-8 * dense.grad_beta.norm().max(1.0));
    }

    #[test]
    fn fit_is_scale_equivariant(seed in any::<u64>(), nmp in fit_dims(), log_c in -2.0f64..2.0) {
        let Some((model, d)) = instance(seed, nmp) else { return Ok(()) };
        let opts = FitOptions::default();
        let (Ok(f1), Ok(f2)) = (fit_two_hyper(&model, &d, &opts), fit_two_hyper(&model, &(&d * log_c.exp()), &opts)) else {
            return Ok(());
        };
        prop_assume!(!f1.boundary_flag && !f2.boundary_flag);
        let c2 = (2.0 * log_c).exp();
        prop_assert!(rel(f1.beta_hat.lambda(), f2.beta_hat.lambda()) < 1e-6);
        prop_assert!(rel(f1.beta_hat.beta_d(), f2.beta_hat.beta_d() * c2) < 1e-6);
        prop_assert!(rel(f1.abic, abic_value(f1.logml, 2)) < 1e-14);
        prop_assert!((f1.abic - (-2.0 * f1.logml + 4.0)).abs() < 1e-9 * f1.abic.abs().max(1.0));
    }

    #[test]
    fn in_family_cross_entropy_is_minimal_at_beta0(seed in any::<u64>(), nmp in dims(), bd in 0.1f64..10.0, ba in 0.1f64..10.0) {
        let Some((model, _)) = instance(seed, nmp) else { return Ok(()) };
        let beta0 = HyperPoint::new(1.0, 1.0).unwrap();
        let ce = CrossEntropy::new(&model, &TrueDistribution::InFamily(beta0)).unwrap();
        prop_assert!(ce.value(HyperPoint::new(bd, ba).unwrap()) - ce.value(beta0) >= -1e-10);
    }

    #[test]
    fn matrix_csv_round_trips_exactly(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
        let m = random_gaussian(rows, cols, 1e3, &mut SeedSpec::new(seed, 0).rng());
        prop_assert_eq!(parse_matrix_csv(&format_matrix_csv(&m)).unwrap(), m);
    }

    #[test]
    fn config_round_trips_through_toml(base in 0..=i64::MAX as u64, stream in 0..=i64::MAX as u64, eps in 1e-3f64..2.0, reps in 1usize..5000) {
        let mut cfg = ExperimentConfig::for_suite(Suite::Consistency);
        cfg.seed = SeedSpec::new(base, stream);
        cfg.epsilon = eps;
        cfg.replicates = reps;
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap(), None).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn symmetric_laplace_site_at_zero_data(beta in 0.05f64..20.0, count in 1usize..6) {
        let gm = SeparableGibbsModel::new(Cost::Laplace, Cost::Laplace, count).unwrap();
        let b = HyperPoint::new(beta, beta).unwrap();
        let m = gm.posterior_moments(&DVector::zeros(count), b).unwrap();
        prop_assert!(rel(m.mean_u, m.mean_v) < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    /// Null-space coefficients of `a` never reach the fit.
    #[test]
    fn fit_ignores_null_space_width(seed in any::<u64>(), m in 4usize..9, extra in 1usize..10) {
        let n = m + extra;
        let mut rng = SeedSpec::new(seed, 1).rng();
        let h = random_gaussian(n, m, 1.0, &mut rng);
        let model = build_model(h, DMatrix::identity(n, n), first_difference(m).unwrap(), DEFAULT_RANK_TOL).unwrap();
        let fit_with = |width: f64| {
            let mut rng = SeedSpec::new(seed, 2).rng();
            let a = draw_model_params(&model, 1.0, width, &mut rng);
            let d = draw_data(&model, &a, 1.0, &mut rng);
            fit_two_hyper(&model, &d, &FitOptions::default())
        };
        let (Ok(f0), Ok(f10)) = (fit_with(0.0), fit_with(10.0)) else { return Ok(()) };
        prop_assume!(!f0.boundary_flag && !f10.boundary_flag);
        prop_assert!(rel(f0.beta_hat.lambda(), f10.beta_hat.lambda()) < 1e-6);
        prop_assert!(rel(f0.beta_hat.beta_d(), f10.beta_hat.beta_d()) < 1e-6);
    }
}
