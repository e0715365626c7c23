//! Acceptance run: one line per criterion, nonzero exit if any fails.
//!
//! Runs every suite at its default configuration, so expect a few minutes.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use ebmarg::harness::{run_suite, ExperimentConfig, GeneratorKind, ReportRow, Suite, SweepReport};

struct Run {
    report: SweepReport,
    elapsed: Duration,
}

fn run(cfg: &ExperimentConfig) -> Result<Run, String> {
    let t0 = Instant::now();
    let report = run_suite(cfg).map_err(|e| format!("{} suite failed to run: {e}", cfg.suite))?;
    Ok(Run {
        report,
        elapsed: t0.elapsed(),
    })
}

fn defaults(suite: Suite) -> Result<Run, String> {
    run(&ExperimentConfig::for_suite(suite))
}

fn pick<'a>(r: &'a Run, metric: &str) -> Vec<&'a ReportRow> {
    r.report.rows.iter().filter(|row| row.metric == metric).collect()
}

/// Every named metric is present and none of its rows fails.
fn rows_pass(r: &Run, metrics: &[&str]) -> Result<(), String> {
    for m in metrics {
        let rows = pick(r, m);
        if rows.is_empty() {
            return Err(format!("no `{m}` row"));
        }
        if let Some(bad) = rows.iter().find(|row| row.pass == Some(false)) {
            return Err(format!("{m} = {} (bound {:?}) at {:?}", bad.value, bad.bound, bad.n));
        }
    }
    Ok(())
}

fn all_pass(r: &Run) -> Result<(), String> {
    match r.report.failing_rows().next() {
        None => Ok(()),
        Some(bad) => Err(format!("{} = {} (bound {:?}) at {:?}", bad.metric, bad.value, bad.bound, bad.n)),
    }
}

fn within(r: &Run, limit: Duration) -> Result<(), String> {
    if r.elapsed <= limit {
        Ok(())
    } else {
        Err(format!("took {:.1?}, limit {limit:?}", r.elapsed))
    }
}

fn criterion(failed: &mut usize, id: u32, name: &str, outcome: Result<String, String>) {
    match outcome {
        Ok(note) => println!("criterion {id:>2} PASS  {name}: {note}"),
        Err(why) => {
            *failed += 1;
            println!("criterion {id:>2} FAIL  {name}: {why}");
        }
    }
}

fn secs(r: &Run) -> String {
    format!("{:.1}s", r.elapsed.as_secs_f64())
}

fn main() -> ExitCode {
    let mut failed = 0;
    let identities = defaults(Suite::Identities);

    criterion(&mut failed, 1, "gradient/Hessian vs finite differences", (|| {
        let r = identities.as_ref().map_err(Clone::clone)?;
        rows_pass(r, &["max_gradient_relerr", "max_hessian_relerr", "max_gradient_betaprime_relerr", "max_hessian_betaprime_relerr"])?;
        within(r, Duration::from_secs(10))?;
        Ok(secs(r))
    })());

    criterion(&mut failed, 2, "equipartition and Chebyshev fluctuation bounds", (|| {
        let r = defaults(Suite::Stationarity)?;
        all_pass(&r)?;
        within(&r, Duration::from_secs(60))?;
        Ok(secs(&r))
    })());

    criterion(&mut failed, 3, "MMLE consistency sweep", (|| {
        let r = defaults(Suite::Consistency)?;
        all_pass(&r)?;
        within(&r, Duration::from_secs(300))?;
        let slope = pick(&r, "rmse_betad_loglog_slope").first().map(|x| x.value).unwrap_or(f64::NAN);
        Ok(format!("{}, rmse slope {slope:.3}", secs(&r)))
    })());

    criterion(&mut failed, 4, "unique stationary point", (|| {
        let r = defaults(Suite::Uniqueness)?;
        all_pass(&r)?;
        Ok(secs(&r))
    })());

    criterion(&mut failed, 5, "strong modality with delta_H", (|| {
        let r = identities.as_ref().map_err(Clone::clone)?;
        rows_pass(r, &["min_strong_modality_ratio"])?;
        within(r, Duration::from_secs(30))?;
        let worst = pick(r, "min_strong_modality_ratio").iter().map(|x| x.value).fold(f64::INFINITY, f64::min);
        Ok(format!("worst gap/bound {worst:.3}"))
    })());

    criterion(&mut failed, 6, "Fisher trace and determinant, c_det > 0", (|| {
        let r = identities.as_ref().map_err(Clone::clone)?;
        rows_pass(r, &["fisher_trace_relerr", "fisher_det_relerr", "min_c_det", "proportional_prior_rejected"])?;
        if let Some(bad) = pick(r, "min_c_det").iter().find(|x| !(x.value > 0.0)) {
            return Err(format!("min_c_det = {}", bad.value));
        }
        Ok(secs(r))
    })());

    criterion(&mut failed, 7, "model-selection efficiency", (|| {
        let t = defaults(Suite::Efficiency)?;
        all_pass(&t).map_err(|e| format!("student-t: {e}"))?;
        let mut cfg = ExperimentConfig::for_suite(Suite::Efficiency);
        cfg.generator.kind = GeneratorKind::SecondMoment;
        cfg.generator.tail = "gaussian".into();
        cfg.generator.scale = 2.0;
        let g = run(&cfg)?;
        rows_pass(&g, &["beta0prime_d", "median_betad_hat"]).map_err(|e| format!("doubled gaussian: {e}"))?;
        let last = pick(&g, "median_betad_hat").last().map(|x| x.value).unwrap_or(f64::NAN);
        Ok(format!("doubled-covariance median beta_d_hat {last:.4} at N = 400"))
    })());

    criterion(&mut failed, 8, "asymptotic unbiasedness of a_*", (|| {
        let r = defaults(Suite::Unbiasedness)?;
        all_pass(&r)?;
        let ratio = pick(&r, "normalized_bias_ratio_last_first").first().map(|x| x.value).unwrap_or(f64::NAN);
        Ok(format!("bias ratio N=400/N=100 {ratio:.3}"))
    })());

    criterion(&mut failed, 9, "Gibbs cumulant identities and MMLE", (|| {
        let r = defaults(Suite::Gibbs)?;
        rows_pass(
            &r,
            &[
                "gaussian_quadrature_max_relerr",
                "gaussian_logml_identity_abserr",
                "laplace_logml_identity_abserr",
                "cumulant_chain_first_relerr",
                "cumulant_chain_second_relerr",
                "dF_dbetad_vs_mc_mean_U",
                "dF_dbetaa_vs_mc_mean_V",
                "neg_d2F_dbetad2_vs_mc_var_U",
                "neg_d2F_dbetaa2_vs_mc_var_V",
                "median_abs_err_betad",
            ],
        )?;
        within(&r, Duration::from_secs(300))?;
        Ok(secs(&r))
    })());

    criterion(&mut failed, 10, "byte-identical reruns", (|| {
        for suite in Suite::ALL {
            let cfg = ExperimentConfig::for_suite(suite);
            let a = run(&cfg)?.report;
            let b = run(&cfg)?.report;
            if a.to_csv() != b.to_csv() || a.to_json() != b.to_json() {
                return Err(format!("{suite} reports differ"));
            }
        }
        Ok(format!("{} suites", Suite::ALL.len()))
    })());

    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
