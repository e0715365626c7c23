use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};

use ebmarg::crossentropy::TrueDistribution;
use ebmarg::error::Error;
use ebmarg::harness::{run_suite, ExperimentConfig, Suite};
use ebmarg::linmodel::{build_model, GeneralLinearModel, HyperPoint, DEFAULT_RANK_TOL};
use ebmarg::marginal::MarginalEval;
use ebmarg::mmle::{fit_betad_known_lambda, fit_lambda_known_betad, fit_two_hyper, FitOptions, ProfileEvaluator};
use ebmarg::problem::{read_matrix, read_vector, write_vector, MatrixGenerator};
use ebmarg::sampler::{draw_data, draw_model_params, SecondMomentSampler, SeedSpec, TailFamily};

const DEFAULT_SEED: u64 = 20_240_601;
const SEED_ENV: &str = "EBMARG_SEED";

mod exit {
    pub const NUMERIC: u8 = 1;
    pub const BOUNDARY: u8 = 2;
    pub const VERIFY: u8 = 3;
    pub const USAGE: u8 = 64;
}

/// Maximum marginal likelihood (ABIC) estimation of hyperparameters in
/// linear Bayesian models, and Monte Carlo checks of its asymptotics.
#[derive(Parser, Debug)]
#[command(name = "ebmarg", version)]
struct Cli {
    /// Worker threads for parallel trials (default: available parallelism).
    #[arg(long, global = true, value_name = "K")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit (beta_d, beta_a) to a data vector and print the result as JSON.
    Fit(FitArgs),
    /// Draw (a, d) from a model and write them as CSV.
    Simulate(SimulateArgs),
    /// Run a verification suite and write its report.
    Verify(VerifyArgs),
    /// Evaluate ln P(d; beta) on a (beta_d, lambda) grid and write CSV.
    Sweep(SweepArgs),
}

/// Matrix sources: a CSV path, or a generator such as `random_gaussian(40,20,1)`.
#[derive(Args, Debug)]
struct ProblemArgs {
    /// Forward matrix H (N x M).
    #[arg(long = "H", value_name = "SOURCE")]
    h: String,
    /// Error covariance shape E (N x N).
    #[arg(long = "E", value_name = "SOURCE", default_value = "identity")]
    e: String,
    /// Prior precision shape G (M x M, positive semidefinite).
    #[arg(long = "G", value_name = "SOURCE")]
    g: String,
    /// Relative eigenvalue threshold for the rank of G.
    #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
    rank_tol: f64,
    /// Base seed for random generators (falls back to $EBMARG_SEED).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Data vector CSV (N x 1).
    #[arg(long)]
    d: PathBuf,
    /// Fix lambda and estimate beta_d in closed form.
    #[arg(long, conflicts_with = "betad_fixed")]
    lambda_fixed: Option<f64>,
    /// Fix beta_d and estimate lambda.
    #[arg(long)]
    betad_fixed: Option<f64>,
    /// Write the posterior mode a_* to this CSV.
    #[arg(long, value_name = "PATH")]
    a_star_out: Option<PathBuf>,
    /// Factor A + lambda G at every lambda instead of using the pencil eigenbasis.
    #[arg(long)]
    dense: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Generator {
    InFamily,
    SecondMoment,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 1.0)]
    beta_d: f64,
    #[arg(long, default_value_t = 1.0)]
    beta_a: f64,
    /// Width of the uniform draw of the null-space coefficients of a.
    #[arg(long, default_value_t = 0.0)]
    null_width: f64,
    #[arg(long, value_enum, default_value = "in-family")]
    generator: Generator,
    /// Tail family of the second-moment generator.
    #[arg(long, default_value = "gaussian")]
    tail: String,
    /// Covariance scale of the second-moment generator.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Output path prefix; writes `<prefix>_d.csv` and, in family, `<prefix>_a.csv`.
    #[arg(long, default_value = "sim")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// One of stationarity, consistency, uniqueness, efficiency,
    /// unbiasedness, gibbs, identities.
    suite: String,
    /// TOML file merged over the suite defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sizes as `N,M,P` triples separated by `;`.
    #[arg(long)]
    sizes: Option<String>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    stream: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    null_width: Option<f64>,
    #[arg(long)]
    beta_d0: Option<f64>,
    #[arg(long)]
    beta_a0: Option<f64>,
    /// Report path prefix (default `reports/<suite>`).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Print the merged config as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Data vector CSV; without it d is simulated at (beta_d0, beta_a0).
    #[arg(long)]
    d: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    beta_d0: f64,
    #[arg(long, default_value_t = 1.0)]
    beta_a0: f64,
    #[arg(long, default_value_t = 0.0)]
    null_width: f64,
    #[arg(long, default_value_t = 0.1)]
    betad_min: f64,
    #[arg(long, default_value_t = 10.0)]
    betad_max: f64,
    #[arg(long, default_value_t = 1e-3)]
    lambda_min: f64,
    #[arg(long, default_value_t = 1e3)]
    lambda_max: f64,
    /// Log-spaced points per axis.
    #[arg(long, default_value_t = 50)]
    points: usize,
    /// Add beta_d0 and lambda0 = beta_a0 / beta_d0 to the axes.
    #[arg(long)]
    include_beta0: bool,
    /// Output CSV (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse { .. } | Error::UnknownTag(_) | Error::Config(_) | Error::Io(_) => exit::USAGE,
            _ => exit::NUMERIC,
        };
        Failure {
            code,
            msg: e.to_string(),
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: exit::USAGE,
        msg: msg.into(),
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE } else { 0 });
        }
    };
    if let Some(k) = cli.threads {
        if k == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(exit::USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(exit::USAGE);
        }
    }
    let outcome = match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn env_seed() -> CliResult<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| usage(format!("{SEED_ENV} must be an unsigned integer, got `{s}`"))),
        Err(_) => Ok(None),
    }
}

fn resolve_seed(flag: Option<u64>) -> CliResult<u64> {
    Ok(flag.or(env_seed()?).unwrap_or(DEFAULT_SEED))
}

/// Reads `source` as a CSV when it names an existing file, else as a generator.
fn matrix_source(source: &str, default_size: Option<usize>, seed: SeedSpec) -> CliResult<DMatrix<f64>> {
    let path = Path::new(source);
    if path.is_file() {
        return read_matrix(path).map_err(|e| match e {
            Error::Parse { line, msg } => usage(format!("{source}: line {line}: {msg}")),
            other => other.into(),
        });
    }
    let generator = MatrixGenerator::parse(source)
        .map_err(|e| usage(format!("`{source}` is neither a file nor a generator ({e})")))?;
    Ok(generator.build(default_size, &mut seed.rng())?)
}

fn read_data(path: &Path) -> CliResult<DVector<f64>> {
    read_vector(path).map_err(|e| match e {
        Error::Parse { line, msg } => usage(format!("{}: line {line}: {msg}", path.display())),
        other => other.into(),
    })
}

/// Matrices use streams 0..3 of the seed, simulated vectors streams 3 and 4.
fn build_problem(p: &ProblemArgs) -> CliResult<(GeneralLinearModel, u64)> {
    let seed = resolve_seed(p.seed)?;
    let h = matrix_source(&p.h, None, SeedSpec::new(seed, 0))?;
    let e = matrix_source(&p.e, Some(h.nrows()), SeedSpec::new(seed, 1))?;
    let g = matrix_source(&p.g, Some(h.ncols()), SeedSpec::new(seed, 2))?;
    Ok((build_model(h, e, g, p.rank_tol)?, seed))
}

fn cmd_fit(args: FitArgs) -> CliResult<u8> {
    let (model, _) = build_problem(&args.problem)?;
    let d = read_data(&args.d)?;
    let opts = FitOptions {
        fast_path: !args.dense,
        ..FitOptions::default()
    };
    let fit = match (args.lambda_fixed, args.betad_fixed) {
        (Some(lambda), _) => fit_betad_known_lambda(&model, &d, lambda)?,
        (None, Some(bd)) => fit_lambda_known_betad(&model, &d, bd, &opts)?,
        (None, None) => fit_two_hyper(&model, &d, &opts)?,
    };
    if let Some(path) = &args.a_star_out {
        write_vector(path, &fit.a_star)?;
    }
    let json = serde_json::json!({
        "beta_d": fit.beta_hat.beta_d(),
        "beta_a": fit.beta_hat.beta_a(),
        "lambda": fit.beta_hat.lambda(),
        "logml": fit.logml,
        "abic": fit.abic,
        "gradient_norm": fit.gradient_norm,
        "boundary_flag": fit.boundary_flag,
        "a_star_path": args.a_star_out.as_ref().map(|p| p.display().to_string()),
    });
    println!("{}", serde_json::to_string_pretty(&json).expect("json"));
    Ok(if fit.boundary_flag { exit::BOUNDARY } else { 0 })
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_simulate(args: SimulateArgs) -> CliResult<u8> {
    let (model, seed) = build_problem(&args.problem)?;
    let beta = HyperPoint::new(args.beta_d, args.beta_a)?;
    if !(args.null_width >= 0.0 && args.null_width.is_finite()) {
        return Err(usage(format!("--null-width must be nonnegative, got {}", args.null_width)));
    }
    let d_path = with_suffix(&args.out, "_d.csv");
    match args.generator {
        Generator::InFamily => {
            let a = draw_model_params(&model, beta.beta_a(), args.null_width, &mut SeedSpec::new(seed, 3).rng());
            let d = draw_data(&model, &a, beta.beta_d(), &mut SeedSpec::new(seed, 4).rng());
            let a_path = with_suffix(&args.out, "_a.csv");
            write_vector(&a_path, &a)?;
            write_vector(&d_path, &d)?;
            println!("{}", a_path.display());
        }
        Generator::SecondMoment => {
            let tail: TailFamily = args.tail.parse()?;
            if !(args.scale > 0.0 && args.scale.is_finite()) {
                return Err(usage(format!("--scale must be positive, got {}", args.scale)));
            }
            let TrueDistribution::SecondMoment { mean, cov, tail } = TrueDistribution::scaled_predictive(&model, beta, args.scale, tail)? else {
                unreachable!("scaled_predictive builds a second-moment distribution")
            };
            let sampler = SecondMomentSampler::new(mean, &cov, tail)?;
            write_vector(&d_path, &sampler.draw(&mut SeedSpec::new(seed, 4).rng()))?;
        }
    }
    println!("{}", d_path.display());
    Ok(0)
}

fn parse_sizes(text: &str) -> CliResult<Vec<[usize; 3]>> {
    text.split(';')
        .map(|triple| {
            let v: Vec<usize> = triple
                .split(',')
                .map(|x| x.trim().parse())
                .collect::<Result<_, _>>()
                .map_err(|_| usage(format!("bad size `{triple}`, expected N,M,P")))?;
            <[usize; 3]>::try_from(v).map_err(|_| usage(format!("bad size `{triple}`, expected N,M,P")))
        })
        .collect()
}

fn verify_config(args: &VerifyArgs) -> CliResult<ExperimentConfig> {
    let suite: Suite = args.suite.parse().map_err(|_| {
        let names: Vec<&str> = Suite::ALL.iter().map(|s| s.name()).collect();
        usage(format!("unknown suite `{}`; expected one of {}", args.suite, names.join(", ")))
    })?;
    let mut cfg = ExperimentConfig::for_suite(suite);
    if let Some(seed) = env_seed()? {
        cfg.seed.base_seed = seed;
    }
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        cfg = cfg.overlay_toml(&text)?;
    }
    if let Some(s) = &args.sizes {
        cfg.sizes = parse_sizes(s)?;
    }
    if let Some(r) = args.replicates {
        cfg.replicates = r;
    }
    if let Some(s) = args.seed {
        cfg.seed.base_seed = s;
    }
    if let Some(s) = args.stream {
        cfg.seed.stream_index = s;
    }
    if let Some(e) = args.epsilon {
        cfg.epsilon = e;
    }
    if let Some(w) = args.null_width {
        cfg.null_width = w;
    }
    if let Some(b) = args.beta_d0 {
        cfg.beta0.beta_d = b;
    }
    if let Some(b) = args.beta_a0 {
        cfg.beta0.beta_a = b;
    }
    if let Some(o) = &args.output {
        cfg.output = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_verify(args: VerifyArgs) -> CliResult<u8> {
    let cfg = verify_config(&args)?;
    if args.print_config {
        print!("{}", cfg.to_toml()?);
        return Ok(0);
    }
    let report = run_suite(&cfg)?;
    let prefix = cfg
        .output
        .clone()
        .unwrap_or_else(|| Path::new("reports").join(cfg.suite.name()));
    let (csv, json) = report.write(&prefix)?;
    eprintln!("wrote {} and {}", csv.display(), json.display());
    if report.overall_pass {
        println!("{}: pass ({} rows)", cfg.suite, report.rows.len());
        Ok(0)
    } else {
        println!("{}: FAIL", cfg.suite);
        println!("{}", ebmarg::harness::CSV_HEADER);
        for row in report.failing_rows() {
            println!("{}", ebmarg::harness::SweepReport::row_csv(row));
        }
        Ok(exit::VERIFY)
    }
}

fn log_axis(lo: f64, hi: f64, points: usize, extra: Option<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = if points == 1 {
        vec![lo]
    } else {
        (0..points)
            .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (points - 1) as f64).exp())
            .collect()
    };
    if let Some(x) = extra {
        if !v.iter().any(|&y| (y - x).abs() <= 1e-12 * x) {
            v.push(x);
            v.sort_by(f64::total_cmp);
        }
    }
    v
}

fn cmd_sweep(args: SweepArgs) -> CliResult<u8> {
    let ranges_ok = args.betad_min > 0.0
        && args.betad_max >= args.betad_min
        && args.lambda_min > 0.0
        && args.lambda_max >= args.lambda_min
        && args.points > 0;
    if !ranges_ok {
        return Err(usage("sweep needs 0 < min <= max on both axes and --points > 0"));
    }
    let (model, seed) = build_problem(&args.problem)?;
    let beta0 = HyperPoint::new(args.beta_d0, args.beta_a0)?;
    let d = match &args.d {
        Some(path) => read_data(path)?,
        None => {
            let a = draw_model_params(&model, beta0.beta_a(), args.null_width, &mut SeedSpec::new(seed, 3).rng());
            draw_data(&model, &a, beta0.beta_d(), &mut SeedSpec::new(seed, 4).rng())
        }
    };
    let (bd0, l0) = if args.include_beta0 {
        (Some(beta0.beta_d()), Some(beta0.lambda()))
    } else {
        (None, None)
    };
    let betads = log_axis(args.betad_min, args.betad_max, args.points, bd0);
    let lambdas = log_axis(args.lambda_min, args.lambda_max, args.points, l0);
    let ev = ProfileEvaluator::new(&model, &d, true)?;
    let terms = lambdas.iter().map(|&l| ev.terms(l)).collect::<Result<Vec<_>, _>>()?;
    let mut out = String::from("beta_d,lambda,logml,grad_betad,grad_lambda\n");
    for &bd in &betads {
        for (&lambda, t) in lambdas.iter().zip(&terms) {
            let m = MarginalEval::from_terms(ev.dims(), t, HyperPoint::from_lambda(bd, lambda)?);
            let vals = [m.logml, m.grad_betaprime[0], m.grad_betaprime[1]];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Failure {
                    code: exit::NUMERIC,
                    msg: format!("non-finite value at beta_d = {bd}, lambda = {lambda}"),
                });
            }
            out.push_str(&format!("{bd},{lambda},{},{},{}\n", vals[0], vals[1], vals[2]));
        }
    }
    match &args.out {
        Some(path) => std::fs::write(path, out).map_err(|e| usage(format!("{}: {e}", path.display())))?,
        None => print!("{out}"),
    }
    Ok(0)
}
