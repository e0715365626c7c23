use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_ebmarg");

fn ebmarg(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("EBMARG_SEED")
        .output()
        .expect("spawn ebmarg")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const PROBLEM: [&str; 6] = ["--H", "random_gaussian(40,10,1)", "--G", "first_difference(10)", "--seed", "11"];

fn simulate(dir: &Path, prefix: &str, extra: &[&str]) -> Output {
    let mut args = vec!["simulate"];
    args.extend(PROBLEM);
    args.extend(["--out", prefix]);
    args.extend(extra);
    ebmarg(dir, &args)
}

#[test]
fn fit_prints_json_with_every_key() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&simulate(dir.path(), "s", &[])), 0);
    let mut args = vec!["fit"];
    args.extend(PROBLEM);
    args.extend(["--d", "s_d.csv", "--a-star-out", "astar.csv"]);
    let out = ebmarg(dir.path(), &args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    for key in ["beta_d", "beta_a", "lambda", "logml", "abic", "gradient_norm", "boundary_flag", "a_star_path"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
    let logml = json["logml"].as_f64().unwrap();
    assert!((json["abic"].as_f64().unwrap() - (-2.0 * logml + 4.0)).abs() < 1e-9 * logml.abs().max(1.0));
    assert!(dir.path().join("astar.csv").is_file());
}

#[test]
fn fit_with_fixed_lambda_keeps_it() {
    let dir = TempDir::new().unwrap();
    simulate(dir.path(), "s", &[]);
    let mut args = vec!["fit"];
    args.extend(PROBLEM);
    args.extend(["--d", "s_d.csv", "--lambda-fixed", "0.5"]);
    let out = ebmarg(dir.path(), &args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((json["lambda"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn fit_dense_and_fast_agree() {
    let dir = TempDir::new().unwrap();
    simulate(dir.path(), "s", &[]);
    let run = |extra: &[&str]| {
        let mut args = vec!["fit"];
        args.extend(PROBLEM);
        args.extend(["--d", "s_d.csv"]);
        args.extend(extra);
        let out = ebmarg(dir.path(), &args);
        let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
        json["lambda"].as_f64().unwrap()
    };
    let (fast, dense) = (run(&[]), run(&["--dense"]));
    assert!((fast - dense).abs() < 1e-6 * fast);
}

#[test]
fn malformed_csv_reports_the_line() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("bad.csv"), "3,1\n1.0\nnope\n2.0\n").unwrap();
    let mut args = vec!["fit"];
    args.extend(["--H", "random_gaussian(3,2,1)", "--G", "identity(2)", "--d", "bad.csv"]);
    let out = ebmarg(dir.path(), &args);
    assert_eq!(code(&out), 64);
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn ill_posed_model_exits_numeric() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("g.csv"), "5,5\n1,0,0,0,0\n0,0,0,0,0\n0,0,0,0,0\n0,0,0,0,0\n0,0,0,0,0\n").unwrap();
    fs::write(dir.path().join("d.csv"), "2,1\n1\n2\n").unwrap();
    let out = ebmarg(dir.path(), &["fit", "--H", "random_gaussian(2,5,1)", "--G", "g.csv", "--d", "d.csv"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("ill-posed"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_64() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&ebmarg(dir.path(), &["verify", "nonsense"])), 64);
    assert_eq!(code(&ebmarg(dir.path(), &["verify", "identities", "--bogus"])), 64);
    assert_eq!(code(&ebmarg(dir.path(), &["verify", "identities", "--sizes", "1,2"])), 64);
    let out = ebmarg(dir.path(), &["fit", "--H", "mystery(3)", "--G", "identity(2)", "--d", "x.csv"]);
    assert_eq!(code(&out), 64);
}

#[test]
fn help_lists_flags() {
    let dir = TempDir::new().unwrap();
    let out = ebmarg(dir.path(), &["sweep", "--help"]);
    assert_eq!(code(&out), 0);
    for flag in ["--betad-min", "--lambda-max", "--points", "--include-beta0", "--threads"] {
        assert!(stdout(&out).contains(flag), "missing {flag}");
    }
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = TempDir::new().unwrap();
    simulate(dir.path(), "x", &[]);
    simulate(dir.path(), "y", &[]);
    let other = ["simulate", "--H", "random_gaussian(40,10,1)", "--G", "first_difference(10)", "--seed", "12", "--out", "z"];
    assert_eq!(code(&ebmarg(dir.path(), &other)), 0);
    let read = |name: &str| fs::read(dir.path().join(name)).unwrap();
    assert_eq!(read("x_d.csv"), read("y_d.csv"));
    assert_eq!(read("x_a.csv"), read("y_a.csv"));
    assert_ne!(read("x_d.csv"), read("z_d.csv"));
}

#[test]
fn simulate_rejects_negative_null_width() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&simulate(dir.path(), "n", &["--null-width", "-1"])), 64);
    assert_eq!(code(&simulate(dir.path(), "n", &["--null-width", "3"])), 0);
}

#[test]
fn simulate_second_moment_writes_only_data() {
    let dir = TempDir::new().unwrap();
    let out = simulate(dir.path(), "t", &["--generator", "second-moment", "--tail", "student_t(5)", "--scale", "2"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(dir.path().join("t_d.csv").is_file());
    assert!(!dir.path().join("t_a.csv").exists());
}

#[test]
fn verify_identities_writes_reports() {
    let dir = TempDir::new().unwrap();
    let out = ebmarg(dir.path(), &["verify", "identities", "--sizes", "12,8,8", "--replicates", "5"]);
    assert_eq!(code(&out), 0, "{}{}", stdout(&out), stderr(&out));
    assert!(stdout(&out).starts_with("identities: pass"));
    let csv = fs::read_to_string(dir.path().join("reports/identities.csv")).unwrap();
    assert!(csv.starts_with("size_index,N,M,P,metric,value,stderr,bound,pass"));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("reports/identities.json")).unwrap()).unwrap();
    assert_eq!(json["overall_pass"], serde_json::Value::Bool(true));
}

#[test]
fn verify_failure_exits_3_and_echoes_rows() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("small.toml"),
        "sizes = [[20, 20, 20]]\nreplicates = 5\n[gibbs]\ncount = 10\njoint_draws = 2000\ndata_draws = 100\ncritical_grid = 2\ncritical_draws = 40\n",
    )
    .unwrap();
    let out = ebmarg(dir.path(), &["verify", "gibbs", "--config", "small.toml", "--output", "out/g"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("gibbs: FAIL"));
    assert!(text.contains("negative_diag_hessian_fraction"));
    assert!(text.lines().skip(2).all(|l| l.ends_with(",false")));
    assert!(dir.path().join("out/g.csv").is_file());
}

#[test]
fn verify_seed_flag_beats_config_and_env() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("c.toml"), "[seed]\nbase_seed = 5\nstream_index = 0\n").unwrap();
    let out = Command::new(BIN)
        .args(["verify", "consistency", "--config", "c.toml", "--print-config"])
        .current_dir(dir.path())
        .env("EBMARG_SEED", "9")
        .output()
        .unwrap();
    assert!(stdout(&out).contains("base_seed = 5"));
    let out = ebmarg(dir.path(), &["verify", "consistency", "--config", "c.toml", "--seed", "7", "--print-config"]);
    assert!(stdout(&out).contains("base_seed = 7"));
}

#[test]
fn sweep_grid_is_complete_and_finite() {
    let dir = TempDir::new().unwrap();
    let mut args = vec!["sweep"];
    args.extend(PROBLEM);
    args.extend(["--out", "grid.csv"]);
    let out = ebmarg(dir.path(), &args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("grid.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("beta_d,lambda,logml,grad_betad,grad_lambda"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 2500);
    assert!(rows.iter().flatten().all(|v| v.is_finite()));
}

#[test]
fn sweep_can_include_beta0() {
    let dir = TempDir::new().unwrap();
    let mut args = vec!["sweep"];
    args.extend(PROBLEM);
    args.extend(["--points", "4", "--beta-d0", "2", "--beta-a0", "3", "--include-beta0"]);
    let out = ebmarg(dir.path(), &args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows: Vec<Vec<f64>> = stdout(&out)
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 25);
    assert!(rows.iter().any(|r| r[0] == 2.0 && (r[1] - 1.5).abs() < 1e-15));
}
