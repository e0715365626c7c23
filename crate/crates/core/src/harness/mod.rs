//! Monte Carlo verification suites.
//!
//! Each suite turns one asymptotic statement into finite-size checks and
//! reports them as rows with a value, a standard error, a bound and a verdict.
//! Trial `k` of size `s` draws from stream `seed.stream_index + (s << 32 | k)`
//! of `seed.base_seed`, so every trial can be replayed alone. Trials run in
//! parallel and are collected in index order before any reduction.

pub mod config;
mod gibbs;
mod linear;
pub mod report;
pub mod stats;

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linmodel::{build_model, GeneralLinearModel, DEFAULT_RANK_TOL};
use crate::problem;

pub use config::{ExperimentConfig, GeneratorKind, Suite};
pub use report::{Bound, ReportRow, SweepReport, TrialSeeds, CSV_HEADER};

/// Trial index reserved for the matrices of a size.
const MATRIX_TRIAL: usize = 0xFFFF_FFFF;

/// Trial-failure fraction above which a suite aborts.
pub const MAX_FAILURE_RATE: f64 = 0.10;

fn stream(cfg: &ExperimentConfig, size_index: usize, trial: usize) -> u64 {
    cfg.seed
        .stream_index
        .wrapping_add(((size_index as u64) << 32) | trial as u64)
}

fn trial_rng(cfg: &ExperimentConfig, size_index: usize, trial: usize) -> ChaCha8Rng {
    cfg.seed.with_stream(stream(cfg, size_index, trial)).rng()
}

fn trial_seeds(cfg: &ExperimentConfig, size_index: usize, first_trial: usize, count: usize) -> TrialSeeds {
    TrialSeeds {
        base_seed: cfg.seed.base_seed,
        first_stream: stream(cfg, size_index, first_trial),
        count: count as u64,
    }
}

/// Builds a model of the given size from the configured generator names.
pub fn build_sized_model(cfg: &ExperimentConfig, [n, m, p]: [usize; 3], rng: &mut ChaCha8Rng) -> Result<GeneralLinearModel> {
    let mc = &cfg.matrices;
    let h = match mc.h.as_str() {
        "random_gaussian" => problem::random_gaussian(n, m, mc.h_scale, rng),
        "subsample" => problem::subsample(n, m)?,
        other => return Err(Error::UnknownTag(other.to_string())),
    };
    let e = match mc.e.as_str() {
        "identity" => problem::identity(n),
        "random_spd" => problem::random_spd(n, rng),
        other => return Err(Error::UnknownTag(other.to_string())),
    };
    let need = |want: usize, name: &str| -> Result<()> {
        if p == want {
            Ok(())
        } else {
            Err(Error::Config(format!("g = {name} has rank {want}, but P = {p}")))
        }
    };
    let g: DMatrix<f64> = match mc.g.as_str() {
        "identity" => {
            need(m, "identity")?;
            problem::identity(m)
        }
        "random_psd" => problem::random_psd(m, p, rng),
        "first_difference" => {
            need(m.saturating_sub(1), "first_difference")?;
            problem::first_difference(m)?
        }
        "second_difference" => {
            need(m.saturating_sub(2), "second_difference")?;
            problem::second_difference(m)?
        }
        other => return Err(Error::UnknownTag(other.to_string())),
    };
    build_model(h, e, g, DEFAULT_RANK_TOL)
}

fn size_model(cfg: &ExperimentConfig, size_index: usize) -> Result<GeneralLinearModel> {
    build_sized_model(cfg, cfg.sizes[size_index], &mut trial_rng(cfg, size_index, MATRIX_TRIAL))
}

fn run_trials<T: Send, F>(first: usize, count: usize, f: F) -> Vec<Result<T>>
where
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (first..first + count).into_par_iter().map(f).collect()
}

/// Separates failed trials, emitting a failure-rate row; aborts above
/// [`MAX_FAILURE_RATE`].
fn contain<T>(results: Vec<Result<T>>, size_index: usize, size: [usize; 3], seeds: TrialSeeds, what: &str) -> Result<(Vec<T>, ReportRow)> {
    let total = results.len();
    let mut ok = Vec::with_capacity(total);
    let mut first_error = None;
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                first_error.get_or_insert_with(|| format!("trial {k}: {e}"));
            }
        }
    }
    let failed = total - ok.len();
    let rate = failed as f64 / total.max(1) as f64;
    if rate > MAX_FAILURE_RATE {
        return Err(Error::TrialFailures {
            failed,
            total,
            detail: format!("{what} at size {size_index} {size:?}: {}", first_error.unwrap_or_default()),
        });
    }
    let row = ReportRow::new(format!("{what}_failure_rate"), rate)
        .size(size_index, size)
        .seeds(seeds)
        .at_most(MAX_FAILURE_RATE, 0.0);
    Ok((ok, row))
}

/// Runs the suite named in the config.
pub fn run_suite(cfg: &ExperimentConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let rows = match cfg.suite {
        Suite::Consistency => linear::consistency(cfg)?,
        Suite::Stationarity => linear::stationarity(cfg)?,
        Suite::Uniqueness => linear::uniqueness(cfg)?,
        Suite::Efficiency => linear::efficiency(cfg)?,
        Suite::Unbiasedness => linear::unbiasedness(cfg)?,
        Suite::Identities => linear::identities(cfg)?,
        Suite::Gibbs => gibbs::gibbs(cfg)?,
    };
    Ok(SweepReport::new(cfg, rows))
}

pub fn run_consistency_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    run_as(cfg, Suite::Consistency)
}

pub fn run_stationarity_check(cfg: &ExperimentConfig) -> Result<SweepReport> {
    run_as(cfg, Suite::Stationarity)
}

pub fn run_uniqueness_check(cfg: &ExperimentConfig) -> Result<SweepReport> {
    run_as(cfg, Suite::Uniqueness)
}

pub fn run_efficiency_check(cfg: &ExperimentConfig) -> Result<SweepReport> {
    run_as(cfg, Suite::Efficiency)
}

pub fn run_unbiasedness_check(cfg: &ExperimentConfig) -> Result<SweepReport> {
    run_as(cfg, Suite::Unbiasedness)
}

fn run_as(cfg: &ExperimentConfig, suite: Suite) -> Result<SweepReport> {
    let mut cfg = cfg.clone();
    cfg.suite = suite;
    run_suite(&cfg)
}
