//! Suites on the general linear model.

use nalgebra::{DVector, Matrix2, Vector2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, GeneratorKind};
use super::report::ReportRow;
use super::stats::{binomial_stderr, mean, median, median_stderr, slope, stderr, strictly_decreasing, variance, variance_stderr};
use super::{build_sized_model, contain, run_trials, size_model, trial_rng, trial_seeds};
use crate::crossentropy::{delta_h, effective_true_hyper, profile_curve, CrossEntropy, TrueDistribution};
use crate::error::{Error, Result};
use crate::linmodel::{build_model, GeneralLinearModel, HyperPoint, DEFAULT_RANK_TOL};
use crate::marginal::{c_det, fisher_summary, log_marginal, log_marginal_fast, model_cost_means, posterior_means_from_terms};
use crate::mmle::{fit_two_hyper, FitOptions, ProfileEvaluator};
use crate::optimize::SearchOptions;
use crate::problem;
use crate::sampler::{draw_data, draw_model_params, SecondMomentSampler};

const A0_TRIAL: usize = 0xFFFF_FFFE;
const SQUARE_TRIAL: usize = 0xFFFF_FFFD;
const FISHER_TRIAL: usize = 0xFFFF_FFFC;
const SQUARE_BASE: usize = 0x1000_0000;
const POPULATION_BASE: usize = 0x2000_0000;
const FISHER_BASE: usize = 0x3000_0000;
const EQUIPARTITION_BASE: usize = 0x4000_0000;

fn in_family_data(model: &GeneralLinearModel, beta: HyperPoint, null_width: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let a = draw_model_params(model, beta.beta_a(), null_width, rng);
    draw_data(model, &a, beta.beta_d(), rng)
}

fn fraction(x: impl Iterator<Item = bool>) -> (f64, usize) {
    let (mut hit, mut total) = (0usize, 0usize);
    for b in x {
        total += 1;
        hit += b as usize;
    }
    (hit as f64 / total.max(1) as f64, total)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

pub(super) fn consistency(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    let beta0 = cfg.beta0.point()?;
    let (bd0, ba0) = (beta0.beta_d(), beta0.beta_a());
    let last = cfg.sizes.len() - 1;
    let mut rows = Vec::new();
    let (mut med_d, mut med_a, mut log_n, mut log_rmse) = (vec![], vec![], vec![], vec![]);
    for (si, &size) in cfg.sizes.iter().enumerate() {
        let model = size_model(cfg, si)?;
        let seeds = trial_seeds(cfg, si, 0, cfg.replicates);
        let results = run_trials(0, cfg.replicates, |k| {
            let d = in_family_data(&model, beta0, cfg.null_width, &mut trial_rng(cfg, si, k));
            let fit = fit_two_hyper(&model, &d, &FitOptions::default())?;
            Ok((fit.beta_hat.beta_d(), fit.beta_hat.beta_a(), fit.boundary_flag))
        });
        let (fits, fail_row) = contain(results, si, size, seeds, "fit")?;
        rows.push(fail_row);
        let ed: Vec<f64> = fits.iter().map(|f| (f.0 - bd0).abs()).collect();
        let ea: Vec<f64> = fits.iter().map(|f| (f.1 - ba0).abs()).collect();
        let dist: Vec<f64> = ed.iter().zip(&ea).map(|(x, y)| x.hypot(*y)).collect();
        let rmse = mean(&ed.iter().map(|e| e * e).collect::<Vec<_>>()).sqrt();
        let row = |metric: &str, value: f64| ReportRow::new(metric, value).size(si, size).seeds(seeds);
        rows.push(row("median_abs_err_betad", median(&ed)).stderr(median_stderr(&ed)));
        rows.push(row("median_abs_err_betaa", median(&ea)).stderr(median_stderr(&ea)));
        rows.push(row("rmse_betad", rmse));
        let (exceed, n) = fraction(dist.iter().map(|&x| x > cfg.epsilon));
        let mut r = row("eps_exceedance_freq", exceed).stderr(binomial_stderr(exceed, n));
        if si == last {
            r = r.at_most(0.05, 0.0);
        }
        rows.push(r);
        rows.push(row("boundary_fraction", fraction(fits.iter().map(|f| f.2)).0));
        med_d.push(median(&ed));
        med_a.push(median(&ea));
        log_n.push((size[0] as f64).ln());
        log_rmse.push(rmse.ln());
    }
    if cfg.sizes.len() >= 2 {
        rows.push(ReportRow::new("median_abs_err_betad_decreasing", med_d[last]).verdict(strictly_decreasing(&med_d)));
        rows.push(ReportRow::new("median_abs_err_betaa_decreasing", med_a[last]).verdict(strictly_decreasing(&med_a)));
        let (b, se) = slope(&log_n, &log_rmse);
        let mut r = ReportRow::new("rmse_betad_loglog_slope", b).within(-0.7, -0.3);
        if se.is_finite() {
            r = r.stderr(se);
        }
        rows.push(r);
    }
    Ok(rows)
}

pub(super) fn stationarity(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    let beta0 = cfg.beta0.point()?;
    let eps = cfg.epsilon;
    let mut rows = Vec::new();
    for (si, &size) in cfg.sizes.iter().enumerate() {
        let model = size_model(cfg, si)?;
        let (n, p) = (model.n() as f64, model.p() as f64);
        let (mu0, mv0, vu0, vv0) = model_cost_means(&model, beta0);
        let seeds = trial_seeds(cfg, si, 0, cfg.replicates);
        let results = run_trials(0, cfg.replicates, |k| {
            let d = in_family_data(&model, beta0, cfg.null_width, &mut trial_rng(cfg, si, k));
            let ev = ProfileEvaluator::new(&model, &d, true)?;
            let t = ev.terms(beta0.lambda())?;
            Ok(posterior_means_from_terms(ev.dims(), &t, beta0.beta_d()))
        });
        let (post, fail_row) = contain(results, si, size, seeds, "posterior")?;
        rows.push(fail_row);
        let pu: Vec<f64> = post.iter().map(|x| x.0).collect();
        let pv: Vec<f64> = post.iter().map(|x| x.1).collect();
        let row = |metric: &str, value: f64| ReportRow::new(metric, value).size(si, size).seeds(seeds);
        let se = stderr(&pu);
        rows.push(row("mean_posterior_U", mean(&pu)).stderr(se).near(mu0, 4.0 * se));
        let se = stderr(&pv);
        rows.push(row("mean_posterior_V", mean(&pv)).stderr(se).near(mv0, 4.0 * se));
        let (fu, r) = fraction(pu.iter().map(|u| (u / mu0 - 1.0).abs() > eps));
        let se = binomial_stderr(fu, r);
        rows.push(row("stationarity_exceedance_U", fu).stderr(se).at_most(2.0 / (n * eps * eps), 3.0 * se));
        let (fv, r) = fraction(pv.iter().map(|v| (v / mv0 - 1.0).abs() > eps));
        let se = binomial_stderr(fv, r);
        rows.push(row("stationarity_exceedance_V", fv).stderr(se).at_most(2.0 / (p * eps * eps), 3.0 * se));

        let draws = cfg.equipartition_draws;
        let eq_seeds = trial_seeds(cfg, si, EQUIPARTITION_BASE, draws);
        let results = run_trials(EQUIPARTITION_BASE, draws, |k| {
            let mut rng = trial_rng(cfg, si, k);
            let a = draw_model_params(&model, beta0.beta_a(), cfg.null_width, &mut rng);
            let d = draw_data(&model, &a, beta0.beta_d(), &mut rng);
            Ok(model.cost_functions(&d, &a))
        });
        let (costs, fail_row) = contain(results, si, size, eq_seeds, "equipartition")?;
        rows.push(fail_row);
        let us: Vec<f64> = costs.iter().map(|c| c.0).collect();
        let vs: Vec<f64> = costs.iter().map(|c| c.1).collect();
        let row = |metric: &str, value: f64| ReportRow::new(metric, value).size(si, size).seeds(eq_seeds);
        let se = stderr(&us);
        rows.push(row("equipartition_mean_U", mean(&us)).stderr(se).near(mu0, 4.0 * se));
        let se = variance_stderr(&us);
        rows.push(row("equipartition_var_U", variance(&us)).stderr(se).near(vu0, 4.0 * se));
        let se = stderr(&vs);
        rows.push(row("equipartition_mean_V", mean(&vs)).stderr(se).near(mv0, 4.0 * se));
        let se = variance_stderr(&vs);
        rows.push(row("equipartition_var_V", variance(&vs)).stderr(se).near(vv0, 4.0 * se));
    }
    Ok(rows)
}

pub(super) fn uniqueness(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    let beta0 = cfg.beta0.point()?;
    let grid = cfg.lambda_grid.grid();
    let mut rows = Vec::new();
    for (si, &size) in cfg.sizes.iter().enumerate() {
        let model = size_model(cfg, si)?;
        let seeds = trial_seeds(cfg, si, 0, cfg.replicates);
        let results = run_trials(0, cfg.replicates, |k| {
            let d = in_family_data(&model, beta0, cfg.null_width, &mut trial_rng(cfg, si, k));
            let ev = ProfileEvaluator::new(&model, &d, true)?;
            let grads = grid.iter().map(|&l| ev.profile_gradient(l)).collect::<Result<Vec<_>>>()?;
            Ok(crate::crossentropy::count_sign_changes(&grads))
        });
        let (counts, fail_row) = contain(results, si, size, seeds, "profile")?;
        rows.push(fail_row);
        let (one, r) = fraction(counts.iter().map(|&c| c == 1));
        rows.push(
            ReportRow::new("empirical_single_crossing_fraction", one)
                .size(si, size)
                .seeds(seeds)
                .stderr(binomial_stderr(one, r))
                .at_least(0.95, 0.0),
        );
        let cf: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        rows.push(ReportRow::new("empirical_mean_crossings", mean(&cf)).size(si, size).seeds(seeds).stderr(stderr(&cf)));

        let pop_seeds = trial_seeds(cfg, si, POPULATION_BASE, cfg.instances);
        let results = run_trials(POPULATION_BASE, cfg.instances, |j| {
            let m = build_sized_model(cfg, size, &mut trial_rng(cfg, si, j))?;
            let ce = CrossEntropy::new(&m, &TrueDistribution::InFamily(beta0))?;
            Ok(profile_curve(&ce, &grid).crossing_count)
        });
        let (pop, fail_row) = contain(results, si, size, pop_seeds, "population")?;
        rows.push(fail_row);
        let (one, _) = fraction(pop.iter().map(|&c| c == 1));
        rows.push(
            ReportRow::new("population_single_crossing_fraction", one)
                .size(si, size)
                .seeds(pop_seeds)
                .at_least(1.0, 0.0),
        );
    }
    Ok(rows)
}

pub(super) fn efficiency(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    let beta0 = cfg.beta0.point()?;
    let tail = cfg.generator.tail_family()?;
    let scale = match cfg.generator.kind {
        GeneratorKind::InFamily => 1.0,
        GeneratorKind::SecondMoment => cfg.generator.scale,
    };
    let last = cfg.sizes.len() - 1;
    let mut rows = Vec::new();
    let (mut med_dist, mut med_d) = (vec![], vec![]);
    for (si, &size) in cfg.sizes.iter().enumerate() {
        let model = size_model(cfg, si)?;
        let q = match cfg.generator.kind {
            GeneratorKind::InFamily => TrueDistribution::InFamily(beta0),
            GeneratorKind::SecondMoment => TrueDistribution::scaled_predictive(&model, beta0, scale, tail)?,
        };
        let eff = effective_true_hyper(&model, &q, &SearchOptions::default())?;
        if eff.boundary {
            rows.push(
                ReportRow::new("beta0prime_boundary_lambda", eff.beta.lambda())
                    .size(si, size)
                    .verdict(false),
            );
            continue;
        }
        let target = eff.beta;
        let (td, ta) = (target.beta_d(), target.beta_a());
        // Q carries the second moments of the beta0 predictive times `scale`.
        let (want_d, want_a) = (beta0.beta_d() / scale, beta0.beta_a() / scale);
        rows.push(ReportRow::new("beta0prime_d", td).size(si, size).near(want_d, 1e-6 * want_d));
        rows.push(ReportRow::new("beta0prime_a", ta).size(si, size).near(want_a, 1e-6 * want_a));
        if eff.multimodal {
            rows.push(ReportRow::new("beta0prime_multimodal", 1.0).size(si, size));
        }

        let sampler = match &q {
            TrueDistribution::SecondMoment { mean, cov, tail } => Some(SecondMomentSampler::new(mean.clone(), cov, *tail)?),
            TrueDistribution::InFamily(_) => None,
        };
        let seeds = trial_seeds(cfg, si, 0, cfg.replicates);
        let results = run_trials(0, cfg.replicates, |k| {
            let mut rng = trial_rng(cfg, si, k);
            let d = match &sampler {
                Some(s) => s.draw(&mut rng),
                None => in_family_data(&model, beta0, cfg.null_width, &mut rng),
            };
            let fit = fit_two_hyper(&model, &d, &FitOptions::default())?;
            Ok((fit.beta_hat.beta_d(), fit.beta_hat.beta_a()))
        });
        let (fits, fail_row) = contain(results, si, size, seeds, "fit")?;
        rows.push(fail_row);
        let ed: Vec<f64> = fits.iter().map(|f| (f.0 - td).abs()).collect();
        let dist: Vec<f64> = fits.iter().map(|f| (f.0 - td).hypot(f.1 - ta)).collect();
        let bd_hat: Vec<f64> = fits.iter().map(|f| f.0).collect();
        let row = |metric: &str, value: f64| ReportRow::new(metric, value).size(si, size).seeds(seeds);
        rows.push(row("median_abs_err_betad", median(&ed)).stderr(median_stderr(&ed)));
        rows.push(row("median_dist_to_beta0prime", median(&dist)).stderr(median_stderr(&dist)));
        let mut r = row("median_betad_hat", median(&bd_hat)).stderr(median_stderr(&bd_hat));
        if si == last {
            r = r.near(td, 0.1 * td);
        }
        rows.push(r);
        med_dist.push(median(&dist));
        med_d.push(median(&ed));
    }
    if med_dist.len() >= 2 {
        let l = med_dist.len() - 1;
        rows.push(ReportRow::new("median_abs_err_betad_decreasing", med_d[l]).verdict(strictly_decreasing(&med_d)));
        rows.push(ReportRow::new("median_dist_decreasing", med_dist[l]).verdict(strictly_decreasing(&med_dist)));
    }
    Ok(rows)
}

pub(super) fn unbiasedness(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    let beta0 = cfg.beta0.point()?;
    let mut rows = Vec::new();
    let (mut bias, mut mse) = (vec![], vec![]);
    for (si, &size) in cfg.sizes.iter().enumerate() {
        let model = size_model(cfg, si)?;
        let a0 = draw_model_params(&model, beta0.beta_a(), cfg.null_width, &mut trial_rng(cfg, si, A0_TRIAL));
        let seeds = trial_seeds(cfg, si, 0, cfg.replicates);
        let results = run_trials(0, cfg.replicates, |k| {
            let d = draw_data(&model, &a0, beta0.beta_d(), &mut trial_rng(cfg, si, k));
            let fit = fit_two_hyper(&model, &d, &FitOptions::default())?;
            Ok(fit.a_star - &a0)
        });
        let (devs, fail_row) = contain(results, si, size, seeds, "fit")?;
        rows.push(fail_row);
        let m = model.m();
        let r = devs.len() as f64;
        let mean_dev = devs.iter().fold(DVector::zeros(m), |acc, x| acc + x) / r;
        let noise: f64 = (0..m)
            .map(|j| devs.iter().map(|x| (x[j] - mean_dev[j]).powi(2)).sum::<f64>() / (r - 1.0))
            .sum();
        // Removes the sampling noise of the mean from its squared norm.
        let debiased = mean_dev.norm_squared() - noise / r;
        let nb = (debiased.max(0.0) / m as f64).sqrt();
        let mse_n = devs.iter().map(|x| x.norm_squared()).sum::<f64>() / r / size[0] as f64;
        rows.push(ReportRow::new("normalized_bias", nb).size(si, size).seeds(seeds));
        rows.push(ReportRow::new("mse_over_n", mse_n).size(si, size).seeds(seeds));
        bias.push(nb);
        mse.push(mse_n);

        // The same prior and M on a square design, where lambda = 0 is plain least squares.
        let mut rng = trial_rng(cfg, si, SQUARE_TRIAL);
        let sq = build_sized_model(cfg, [m, m, size[2]], &mut rng)?;
        let sq_a0 = draw_model_params(&sq, beta0.beta_a(), cfg.null_width, &mut rng);
        let a_chol = sq.a().clone().cholesky().ok_or(Error::NotPd)?;
        let sq_seeds = trial_seeds(cfg, si, SQUARE_BASE, cfg.replicates);
        let results = run_trials(SQUARE_BASE, cfg.replicates, |k| {
            let d = draw_data(&sq, &sq_a0, beta0.beta_d(), &mut trial_rng(cfg, si, k));
            let ols = a_chol.solve(&sq.project_data(&d));
            let fit = fit_two_hyper(&sq, &d, &FitOptions::default())?;
            Ok(((ols - &sq_a0).norm_squared(), (fit.a_star - &sq_a0).norm_squared()))
        });
        let sq_size = [m, m, size[2]];
        let (pairs, fail_row) = contain(results, si, sq_size, sq_seeds, "square_fit")?;
        rows.push(fail_row);
        let ols = mean(&pairs.iter().map(|x| x.0).collect::<Vec<_>>());
        let reg = mean(&pairs.iter().map(|x| x.1).collect::<Vec<_>>());
        let row = |metric: &str, value: f64| ReportRow::new(metric, value).size(si, sq_size).seeds(sq_seeds);
        rows.push(row("square_ols_mse", ols));
        rows.push(row("square_regularized_mse", reg));
        rows.push(row("square_ols_to_regularized_mse", ols / reg).at_least(10.0, 0.0));
    }
    if bias.len() >= 2 {
        let l = bias.len() - 1;
        rows.push(ReportRow::new("normalized_bias_ratio_last_first", bias[l] / bias[0]).at_most(0.5, 0.0));
        rows.push(ReportRow::new("mse_over_n_ratio_last_first", mse[l] / mse[0]).at_most(1.5, 0.0));
    }
    Ok(rows)
}

/// Relative errors of the analytic gradient and Hessian against central
/// differences of `ln P`, in `beta` and in `(beta_d, lambda)` coordinates.
pub fn derivative_errors(model: &GeneralLinearModel, d: &DVector<f64>, beta: HyperPoint) -> Result<[f64; 4]> {
    let ev = log_marginal(model, d, beta)?;
    let in_beta = |x: f64, y: f64| -> Result<f64> { Ok(log_marginal(model, d, HyperPoint::new(x, y)?)?.logml) };
    let in_prime = |x: f64, y: f64| -> Result<f64> { Ok(log_marginal(model, d, HyperPoint::from_lambda(x, y)?)?.logml) };
    let (g, h) = fd_derivatives(&in_beta, beta.beta_d(), beta.beta_a(), ev.logml)?;
    let (gp, hp) = fd_derivatives(&in_prime, beta.beta_d(), beta.lambda(), ev.logml)?;
    Ok([
        (ev.grad_beta - g).norm() / g.norm(),
        (ev.hess_beta - h).norm() / h.norm(),
        (ev.grad_betaprime - gp).norm() / gp.norm(),
        (ev.hess_betaprime - hp).norm() / hp.norm(),
    ])
}

fn fd_derivatives<F: Fn(f64, f64) -> Result<f64>>(f: &F, x: f64, y: f64, f0: f64) -> Result<(Vector2<f64>, Matrix2<f64>)> {
    let (hx, hy) = (1e-5 * x, 1e-5 * y);
    let g = Vector2::new(
        (f(x + hx, y)? - f(x - hx, y)?) / (2.0 * hx),
        (f(x, y + hy)? - f(x, y - hy)?) / (2.0 * hy),
    );
    let (hx, hy) = (1e-3 * x, 1e-3 * y);
    let hxx = (f(x + hx, y)? - 2.0 * f0 + f(x - hx, y)?) / (hx * hx);
    let hyy = (f(x, y + hy)? - 2.0 * f0 + f(x, y - hy)?) / (hy * hy);
    let hxy = (f(x + hx, y + hy)? - f(x + hx, y - hy)? - f(x - hx, y + hy)? + f(x - hx, y - hy)?) / (4.0 * hx * hy);
    Ok((g, Matrix2::new(hxx, hxy, hxy, hyy)))
}

/// Smallest ratio of the cross-entropy gap to `N' delta_H (eps/beta_d0)^2 / 2`
/// over a `grid x grid` box of half-width `10 eps` around `beta0`, keeping
/// points with `eps < |beta - beta0| <= 10 eps`.
pub fn strong_modality_ratio(model: &GeneralLinearModel, beta0: HyperPoint, eps: f64, grid: usize) -> Result<f64> {
    let ce = CrossEntropy::new(model, &TrueDistribution::InFamily(beta0))?;
    let delta = delta_h(model, beta0.lambda())?;
    let bound = model.n_eff() as f64 * delta * (eps / beta0.beta_d()).powi(2) / 2.0;
    let base = ce.value(beta0);
    let steps: Vec<f64> = (0..grid)
        .map(|i| -10.0 * eps + 20.0 * eps * i as f64 / (grid - 1).max(1) as f64)
        .collect();
    let mut worst = f64::INFINITY;
    for &sd in &steps {
        for &sa in &steps {
            let (bd, ba) = (beta0.beta_d() + sd, beta0.beta_a() + sa);
            let r = sd.hypot(sa);
            if r <= eps || r > 10.0 * eps || bd <= 0.0 || ba <= 0.0 {
                continue;
            }
            worst = worst.min((ce.value(HyperPoint::new(bd, ba)?) - base) / bound);
        }
    }
    Ok(worst)
}

struct InstanceCheck {
    derivs: [f64; 4],
    c_det: f64,
    fast_dense: f64,
    modality: f64,
    crossings: usize,
}

pub(super) fn identities(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    let beta0 = cfg.beta0.point()?;
    let grid = cfg.lambda_grid.grid();
    let mut rows = Vec::new();
    for (si, &size) in cfg.sizes.iter().enumerate() {
        let seeds = trial_seeds(cfg, si, 0, cfg.replicates);
        let results = run_trials(0, cfg.replicates, |j| {
            let mut rng = trial_rng(cfg, si, j);
            let model = build_sized_model(cfg, size, &mut rng)?;
            let beta = HyperPoint::new(rng.random_range(-1.0f64..1.0).exp(), rng.random_range(-1.0f64..1.0).exp())?;
            let d = in_family_data(&model, beta, cfg.null_width, &mut rng);
            let dense = log_marginal(&model, &d, beta)?.logml;
            let fast = log_marginal_fast(&model, &d, beta)?.logml;
            let ce = CrossEntropy::new(&model, &TrueDistribution::InFamily(beta0))?;
            Ok(InstanceCheck {
                derivs: derivative_errors(&model, &d, beta)?,
                c_det: c_det(&model, beta.lambda())?,
                fast_dense: (fast - dense).abs() / model.n_eff() as f64,
                modality: strong_modality_ratio(&model, beta0, cfg.epsilon, cfg.modality_grid)?,
                crossings: profile_curve(&ce, &grid).crossing_count,
            })
        });
        let (checks, fail_row) = contain(results, si, size, seeds, "instance")?;
        rows.push(fail_row);
        let max = |f: &dyn Fn(&InstanceCheck) -> f64| checks.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        let min = |f: &dyn Fn(&InstanceCheck) -> f64| checks.iter().map(f).fold(f64::INFINITY, f64::min);
        let row = |metric: &str, value: f64| ReportRow::new(metric, value).size(si, size).seeds(seeds);
        rows.push(row("max_gradient_relerr", max(&|c| c.derivs[0])).at_most(1e-6, 0.0));
        rows.push(row("max_hessian_relerr", max(&|c| c.derivs[1])).at_most(1e-5, 0.0));
        rows.push(row("max_gradient_betaprime_relerr", max(&|c| c.derivs[2])).at_most(1e-6, 0.0));
        rows.push(row("max_hessian_betaprime_relerr", max(&|c| c.derivs[3])).at_most(1e-5, 0.0));
        let cd = min(&|c| c.c_det);
        rows.push(row("min_c_det", cd).verdict(cd > 0.0));
        // ln P can sit near zero, so the gap is measured per effective dimension.
        rows.push(row("max_fast_dense_logml_gap_per_dim", max(&|c| c.fast_dense)).at_most(1e-9, 0.0));
        rows.push(row("min_strong_modality_ratio", min(&|c| c.modality)).at_least(1.0, 0.0));
        let (one, _) = fraction(checks.iter().map(|c| c.crossings == 1));
        rows.push(row("population_single_crossing_fraction", one).at_least(1.0, 0.0));

        let model = build_sized_model(cfg, size, &mut trial_rng(cfg, si, FISHER_TRIAL))?;
        let fs = fisher_summary(&model, beta0)?;
        let f_seeds = trial_seeds(cfg, si, FISHER_BASE, cfg.fisher_draws);
        let results = run_trials(FISHER_BASE, cfg.fisher_draws, |k| {
            let d = in_family_data(&model, beta0, cfg.null_width, &mut trial_rng(cfg, si, k));
            Ok(-log_marginal_fast(&model, &d, beta0)?.hess_beta)
        });
        let (hs, fail_row) = contain(results, si, size, f_seeds, "fisher")?;
        rows.push(fail_row);
        let avg = hs.iter().fold(Matrix2::zeros(), |acc, h| acc + h) / hs.len() as f64;
        let row = |metric: &str, value: f64| ReportRow::new(metric, value).size(si, size).seeds(f_seeds);
        rows.push(row("fisher_trace_relerr", rel_err(avg.trace(), fs.trace)).at_most(0.03, 0.0));
        rows.push(row("fisher_det_relerr", rel_err(avg.determinant(), fs.det)).at_most(0.03, 0.0));
    }

    // G proportional to H^T E^-1 H leaves the two hyperparameters unidentifiable.
    let [n, m, _] = cfg.sizes[0];
    let mut rng = trial_rng(cfg, 0, A0_TRIAL);
    let h = problem::random_gaussian(n, m, 1.0, &mut rng);
    let g = h.transpose() * &h * 2.0;
    let rejected = matches!(build_model(h, problem::identity(n), g, DEFAULT_RANK_TOL), Err(Error::Degenerate(_)));
    rows.push(ReportRow::new("proportional_prior_rejected", rejected as u8 as f64).verdict(rejected));
    Ok(rows)
}
