//! Suite on coordinate-separable Gibbs models.

use nalgebra::DVector;

use super::config::ExperimentConfig;
use super::report::{ReportRow, TrialSeeds};
use super::stats::{binomial_stderr, covariance, covariance_stderr, mean, median, median_stderr, stderr, variance, variance_stderr};
use super::{contain, run_trials, trial_rng, trial_seeds};
use crate::error::Result;
use crate::gibbs1d::{critical_ratio, gibbs_mmle, grid_argmax, BetaBox, Cost, GibbsFitOptions, SeparableGibbsModel};
use crate::linmodel::HyperPoint;

const ANALYTIC_TRIAL: usize = 0xFFFF_FFF0;
const IDENTITY_TRIAL: usize = 0xFFFF_FFF1;
const ARGMAX_TRIAL: usize = 0xFFFF_FFF2;
const JOINT_BASE: usize = 0x1000_0000;
const DATA_BASE: usize = 0x2000_0000;
const CRITICAL_BASE: usize = 0x3000_0000;

fn small_row(metric: &str, value: f64, count: usize) -> ReportRow {
    let mut r = ReportRow::new(metric, value);
    r.n = Some(count);
    r.m = Some(count);
    r.p = Some(count);
    r
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Central first and second differences with one Richardson step.
fn fd12<F: Fn(f64) -> Result<f64>>(f: &F, x: f64) -> Result<(f64, f64)> {
    let d = |h: f64| -> Result<(f64, f64)> {
        let (p, c, m) = (f(x + h)?, f(x)?, f(x - h)?);
        Ok(((p - m) / (2.0 * h), (p - 2.0 * c + m) / (h * h)))
    };
    let h = 1e-2 * x;
    let (g1, s1) = d(h)?;
    let (g2, s2) = d(h / 2.0)?;
    Ok(((4.0 * g2 - g1) / 3.0, (4.0 * s2 - s1) / 3.0))
}

/// `ln P(d)` for independent Laplace `a` (rate `ba`) and noise (rate `bd`).
fn laplace_convolution_logml(d: &DVector<f64>, bd: f64, ba: f64) -> f64 {
    d.iter()
        .map(|x| {
            let x = x.abs();
            if (bd - ba).abs() <= 1e-9 * bd {
                (bd / 4.0 * (1.0 + bd * x)).ln() - bd * x
            } else {
                (bd * ba / (2.0 * (ba * ba - bd * bd)) * (ba * (-bd * x).exp() - bd * (-ba * x).exp())).ln()
            }
        })
        .sum()
}

/// `ln P(d)` for Gaussian `a` and noise.
fn gaussian_convolution_logml(d: &DVector<f64>, bd: f64, ba: f64) -> f64 {
    let var = 1.0 / bd + 1.0 / ba;
    d.iter()
        .map(|x| -0.5 * x * x / var - 0.5 * (2.0 * std::f64::consts::PI * var).ln())
        .sum()
}

/// Largest relative error of gaussian/gaussian quadrature against closed forms.
fn gaussian_analytic_error(gm: &SeparableGibbsModel, d: &DVector<f64>, beta: HyperPoint) -> Result<f64> {
    let (bd, ba) = (beta.beta_d(), beta.beta_a());
    let n = gm.count() as f64;
    let two_pi = 2.0 * std::f64::consts::PI;
    let f_closed = -n * 0.5 * ((two_pi / bd).ln() + (two_pi / ba).ln());
    let s2 = 1.0 / (bd + ba);
    let (mut mu, mut mv, mut vu, mut vv) = (0.0, 0.0, 0.0, 0.0);
    for &di in d.iter() {
        let ma = bd * di * s2;
        let r = di - ma;
        mu += 0.5 * (r * r + s2);
        mv += 0.5 * (ma * ma + s2);
        vu += r * r * s2 + 0.5 * s2 * s2;
        vv += ma * ma * s2 + 0.5 * s2 * s2;
    }
    let post = gm.posterior_moments(d, beta)?;
    let model = gm.model_moments(beta)?;
    Ok([
        rel(gm.free_entropy(beta)?, f_closed),
        rel(post.mean_u, mu),
        rel(post.mean_v, mv),
        rel(post.var_u, vu),
        rel(post.var_v, vv),
        rel(model.mean_u, n / (2.0 * bd)),
        rel(model.var_u, n / (2.0 * bd * bd)),
    ]
    .into_iter()
    .fold(0.0, f64::max))
}

pub(super) fn gibbs(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    let beta0 = cfg.beta0.point()?;
    let (bd0, ba0) = (beta0.beta_d(), beta0.beta_a());
    let gc = &cfg.gibbs;
    let (u, v) = gc.costs()?;
    let count = gc.count;
    let gm = SeparableGibbsModel::new(u, v, count)?;
    // Streams of the fixed-size checks live past the configured sizes.
    let space = cfg.sizes.len();
    let one = |trial: usize| trial_seeds(cfg, space, trial, 1);
    let mut rows = Vec::new();

    // Closed forms.
    let gg = SeparableGibbsModel::new(Cost::Gaussian, Cost::Gaussian, count)?;
    let (_, d) = gg.sample_joint(beta0, &mut trial_rng(cfg, space, ANALYTIC_TRIAL));
    rows.push(
        small_row("gaussian_quadrature_max_relerr", gaussian_analytic_error(&gg, &d, beta0)?, count)
            .seeds(one(ANALYTIC_TRIAL))
            .at_most(1e-8, 0.0),
    );
    let err = (gg.log_marginal(&d, beta0)? - gaussian_convolution_logml(&d, bd0, ba0)).abs();
    rows.push(small_row("gaussian_logml_identity_abserr", err, count).seeds(one(ANALYTIC_TRIAL)).at_most(1e-8, 0.0));
    let ll = SeparableGibbsModel::new(Cost::Laplace, Cost::Laplace, count)?;
    let (_, d) = ll.sample_joint(beta0, &mut trial_rng(cfg, space, ANALYTIC_TRIAL));
    let mut err: f64 = 0.0;
    for beta in [beta0, HyperPoint::new(1.5 * bd0, 0.7 * ba0)?] {
        err = err.max((ll.log_marginal(&d, beta)? - laplace_convolution_logml(&d, beta.beta_d(), beta.beta_a())).abs());
    }
    rows.push(small_row("laplace_logml_identity_abserr", err, count).seeds(one(ANALYTIC_TRIAL)).at_most(1e-8, 0.0));

    // Free-entropy derivatives against quadrature moments.
    let (_, d) = gm.sample_joint(beta0, &mut trial_rng(cfg, space, IDENTITY_TRIAL));
    let model = gm.model_moments(beta0)?;
    let post = gm.posterior_moments(&d, beta0)?;
    let f_d = fd12(&|x| gm.free_entropy(HyperPoint::new(x, ba0)?), bd0)?;
    let f_a = fd12(&|y| gm.free_entropy(HyperPoint::new(bd0, y)?), ba0)?;
    let p_d = fd12(&|x| gm.posterior_free_entropy(&d, HyperPoint::new(x, ba0)?), bd0)?;
    let p_a = fd12(&|y| gm.posterior_free_entropy(&d, HyperPoint::new(bd0, y)?), ba0)?;
    let first = [rel(f_d.0, model.mean_u), rel(f_a.0, model.mean_v), rel(p_d.0, post.mean_u), rel(p_a.0, post.mean_v)];
    let second = [rel(-f_d.1, model.var_u), rel(-f_a.1, model.var_v), rel(-p_d.1, post.var_u), rel(-p_a.1, post.var_v)];
    let max = |x: [f64; 4]| x.into_iter().fold(0.0, f64::max);
    rows.push(small_row("cumulant_chain_first_relerr", max(first), count).seeds(one(IDENTITY_TRIAL)).at_most(1e-6, 0.0));
    rows.push(small_row("cumulant_chain_second_relerr", max(second), count).seeds(one(IDENTITY_TRIAL)).at_most(1e-6, 0.0));

    // The same derivatives against Monte Carlo cost moments.
    let seeds = trial_seeds(cfg, space, JOINT_BASE, gc.joint_draws);
    let results = run_trials(JOINT_BASE, gc.joint_draws, |k| {
        let (a, d) = gm.sample_joint(beta0, &mut trial_rng(cfg, space, k));
        Ok(gm.costs(&d, &a))
    });
    let size = [count; 3];
    let (costs, fail_row) = contain(results, space, size, seeds, "joint")?;
    rows.push(fail_row);
    let us: Vec<f64> = costs.iter().map(|c| c.0).collect();
    let vs: Vec<f64> = costs.iter().map(|c| c.1).collect();
    let mc = |metric: &str, fd: f64, est: f64, se: f64| small_row(metric, fd, count).seeds(seeds).stderr(se).near(est, 4.0 * se);
    rows.push(mc("dF_dbetad_vs_mc_mean_U", f_d.0, mean(&us), stderr(&us)));
    rows.push(mc("dF_dbetaa_vs_mc_mean_V", f_a.0, mean(&vs), stderr(&vs)));
    rows.push(mc("neg_d2F_dbetad2_vs_mc_var_U", -f_d.1, variance(&us), variance_stderr(&us)));
    rows.push(mc("neg_d2F_dbetaa2_vs_mc_var_V", -f_a.1, variance(&vs), variance_stderr(&vs)));
    let se = covariance_stderr(&us, &vs);
    rows.push(small_row("joint_cov_UV", covariance(&us, &vs), count).seeds(seeds).stderr(se).near(0.0, 4.0 * se));

    // Posterior means over simulated data.
    let seeds = trial_seeds(cfg, space, DATA_BASE, gc.data_draws);
    let results = run_trials(DATA_BASE, gc.data_draws, |k| {
        let (_, d) = gm.sample_joint(beta0, &mut trial_rng(cfg, space, k));
        let m = gm.posterior_moments(&d, beta0)?;
        Ok((m.mean_u, m.mean_v, m.var_u))
    });
    let (post, fail_row) = contain(results, space, size, seeds, "posterior")?;
    rows.push(fail_row);
    let pu: Vec<f64> = post.iter().map(|x| x.0).collect();
    let pv: Vec<f64> = post.iter().map(|x| x.1).collect();
    let pvar: Vec<f64> = post.iter().map(|x| x.2).collect();
    let (cu, cv, cuv) = (variance(&pu), variance(&pv), covariance(&pu, &pv));
    let min_eig = 0.5 * (cu + cv) - (0.25 * (cu - cv).powi(2) + cuv * cuv).sqrt();
    let row = |metric: &str, value: f64| small_row(metric, value, count).seeds(seeds);
    rows.push(row("interclass_var_U", cu).verdict(cu > 0.0));
    rows.push(row("interclass_var_V", cv).verdict(cv > 0.0));
    // Zero up to rounding when the two classes are exchangeable.
    rows.push(row("interclass_min_eigenvalue", min_eig).at_least(0.0, 1e-12 * (cu + cv)));
    let total = cu + mean(&pvar);
    let se = (variance_stderr(&pu).powi(2) + stderr(&pvar).powi(2)).sqrt();
    rows.push(row("variance_decomposition_U", total).stderr(se).near(model.var_u, 4.0 * se));
    let eps = cfg.epsilon;
    let hits = pu.iter().filter(|x| (*x / model.mean_u - 1.0).abs() > eps).count();
    let freq = hits as f64 / pu.len() as f64;
    let se = binomial_stderr(freq, pu.len());
    let bound = model.var_u / (eps * eps * model.mean_u * model.mean_u);
    rows.push(row("chebyshev_exceedance_U", freq).stderr(se).at_most(bound, 3.0 * se));

    // Critical number ratio, and its extensivity.
    let bx = BetaBox {
        beta_d: (gc.critical_beta_min, gc.critical_beta_max),
        beta_a: (gc.critical_beta_min, gc.critical_beta_max),
    };
    let seed = cfg.seed.with_stream(super::stream(cfg, space, CRITICAL_BASE));
    let points = gc.critical_grid * gc.critical_grid;
    let c_seeds = TrialSeeds {
        base_seed: seed.base_seed,
        first_stream: seed.stream_index,
        count: points as u64,
    };
    let cr = critical_ratio(&gm, &bx, gc.critical_grid, gc.critical_draws, seed)?;
    let cr2 = critical_ratio(&gm.with_count(2 * count)?, &bx, gc.critical_grid, gc.critical_draws, seed)?;
    rows.push(small_row("critical_ratio", cr.value, count).seeds(c_seeds).stderr(cr.stderr).verdict(cr.value > 0.0));
    let se = cr.stderr.hypot(cr2.stderr);
    rows.push(
        small_row("critical_ratio_doubled_count", cr2.value, 2 * count)
            .seeds(c_seeds)
            .stderr(cr2.stderr)
            .near(cr.value, 4.0 * se),
    );
    let neg = cr.points.iter().map(|p| p.negative_fraction).fold(1.0, f64::min);
    let mut r = small_row("negative_diag_hessian_fraction", neg, count).seeds(c_seeds);
    if cr.value > 1.0 {
        r = r.at_least(1.0, 0.0);
    }
    rows.push(r);

    // Stationarity solution against a grid argmax.
    let (_, d) = gm.sample_joint(beta0, &mut trial_rng(cfg, space, ARGMAX_TRIAL));
    let fit = gibbs_mmle(&gm, &d, &GibbsFitOptions::default())?;
    let gbox = BetaBox {
        beta_d: (bd0 / 10.0, bd0 * 10.0),
        beta_a: (ba0 / 10.0, ba0 * 10.0),
    };
    let (best, _) = grid_argmax(&gm, &d, &gbox, 100)?;
    let cell = 100f64.ln() / 99.0;
    let cells = |bd: f64, ba: f64| (fit.beta.beta_d() / bd).ln().abs().max((fit.beta.beta_a() / ba).ln().abs()) / cell;
    let mut off = cells(best.beta_d(), best.beta_a());
    if u == v {
        // ln P is then symmetric under beta_d <-> beta_a, so the mirrored
        // cell holds the same maximum.
        off = off.min(cells(best.beta_a(), best.beta_d()));
    }
    rows.push(small_row("mmle_vs_grid_argmax_cells", off, count).seeds(one(ARGMAX_TRIAL)).at_most(1.0, 0.0));

    // Consistency surrogate at the configured sizes.
    for (si, &size) in cfg.sizes.iter().enumerate() {
        let gm_n = gm.with_count(size[0])?;
        let seeds = trial_seeds(cfg, si, 0, cfg.replicates);
        let results = run_trials(0, cfg.replicates, |k| {
            let (_, d) = gm_n.sample_joint(beta0, &mut trial_rng(cfg, si, k));
            Ok(gibbs_mmle(&gm_n, &d, &GibbsFitOptions::default())?.beta.beta_d())
        });
        let (fits, fail_row) = contain(results, si, size, seeds, "mmle")?;
        rows.push(fail_row);
        let err: Vec<f64> = fits.iter().map(|b| (b - bd0).abs()).collect();
        rows.push(
            ReportRow::new("median_abs_err_betad", median(&err))
                .size(si, size)
                .seeds(seeds)
                .stderr(median_stderr(&err))
                .at_most(0.3, 0.0),
        );
    }
    Ok(rows)
}
