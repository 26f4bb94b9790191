use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn slowfast(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_slowfast"));
    cmd.args(args).env_remove("SLOWFAST_WORKERS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(format!("{name}.toml"));
    std::fs::write(&path, body).unwrap();
    path
}

fn run_config(dir: &Path, body: &str, envs: &[(&str, &str)]) -> (Output, PathBuf) {
    let cfg = write_config(dir, "cfg", body);
    let out = dir.join("out");
    let o = slowfast(&["run", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()], envs);
    (o, out)
}

const NOISE: &str = r#"
name = "noise_small"
seed = 11
output = "runs/noise_small"

[experiment]
kind = "noise"
hurst = [0.3]
steps = 8
paths = 500
"#;

const CLT: &str = r#"
name = "clt_small"
seed = 5
output = "runs/clt_small"

[experiment]
kind = "clt"
hurst = 0.3
observables = ["hermite:2"]
eps = [0.05]
out_steps = 4
paths = 300
limit_paths = 300
resolution = 20
variance_tolerance = 0.5
ks_tolerance = 0.5
"#;

const HOMOGENIZE: &str = r#"
name = "homog_small"
seed = 2
output = "runs/homog_small"

[experiment]
kind = "homogenize"
hurst = 0.3
observables = ["hermite:3"]
fields = ["sin_plus_two"]
x0 = [0.0]
eps = [0.1, 0.05]
paths = 200
limit_paths = 400
limit_steps = 64
resolution = 20
ks_tolerance = 1.0
"#;

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run_config(dir.path(), &NOISE.replace("paths = 500", "paths = 500\nwidth = 3"), &[]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
}

#[test]
fn missing_seed_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = run_config(dir.path(), &NOISE.replace("seed = 11\n", ""), &[]);
    assert_eq!(code(&o), 2);
}

#[test]
fn missing_config_file_is_a_config_error() {
    let o = slowfast(&["run", "/nonexistent/config.toml"], &[]);
    assert_eq!(code(&o), 2);
}

#[test]
fn bad_worker_count_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    for bad in ["abc", "0"] {
        let (o, _) = run_config(dir.path(), NOISE, &[("SLOWFAST_WORKERS", bad)]);
        assert_eq!(code(&o), 2, "SLOWFAST_WORKERS={bad}");
    }
}

#[test]
fn uncentred_observable_fails_the_assumption_gate() {
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = run_config(dir.path(), &CLT.replace("hermite:2", "poly:[0, 0, 1]"), &[]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn low_rank_clt_request_fails_the_assumption_gate() {
    // H₂ at H = 0.75 sits on the critical boundary H*(2) = 1/2
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = run_config(dir.path(), &CLT.replace("hurst = 0.3", "hurst = 0.75"), &[]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn solver_blow_up_is_a_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let body = HOMOGENIZE.replace("sin_plus_two", "linear:60").replace("x0 = [0.0]", "x0 = [1.0]");
    let (o, _) = run_config(dir.path(), &body, &[]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn exit_status_reflects_checks() {
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = run_config(dir.path(), &NOISE.replace("paths = 500", "paths = 500\nn_se = 1e-9"), &[]);
    assert_eq!(code(&o), 1);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("FAIL fbm_covariance_max_z")));
    let (o, out) = run_config(dir.path(), NOISE, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    for f in ["fbm_covariance.csv", "fou_variance.csv", "summary.json", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn csv_numbers_use_seventeen_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let (_, out) = run_config(dir.path(), NOISE, &[]);
    let text = std::fs::read_to_string(out.join("fou_variance.csv")).unwrap();
    let row = text.lines().nth(1).unwrap();
    for field in row.split(',') {
        let (mantissa, _) = field.split_once('e').expect("scientific notation");
        assert_eq!(mantissa.trim_start_matches('-').replace('.', "").len(), 17, "{field}");
    }
}

#[test]
fn polynomial_observable_reports_rank_two() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"
name = "chaos_x2"
seed = 1
output = "runs/chaos_x2"

[experiment]
kind = "chaos"
observables = ["poly:[0, 0, 1]"]
"#;
    let (o, out) = run_config(dir.path(), body, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["details"]["observables"][0]["rank_after_centring"], 2);
}

#[test]
fn rerun_is_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg", CLT);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(slowfast(&["run", cfg.to_str().unwrap(), "-o", a.to_str().unwrap()], &[]).status.success());
    assert!(slowfast(&["run", cfg.to_str().unwrap(), "-o", b.to_str().unwrap()], &[("SLOWFAST_WORKERS", "1")]).status.success());
    for f in ["components.csv", "covariance.csv", "summary.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let ma = slowfast_cli::RunManifest::load(&a.join("manifest.json")).unwrap();
    let mb = slowfast_cli::RunManifest::load(&b.join("manifest.json")).unwrap();
    assert_eq!(ma.files, mb.files);
    assert_eq!(ma.config_hash, mb.config_hash);
    assert_eq!(mb.workers, 1);
}

#[test]
fn report_on_empty_manifest_errors_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("manifest.json");
    std::fs::write(&manifest, "").unwrap();
    let o = slowfast(&["report", manifest.to_str().unwrap()], &[]);
    assert_ne!(code(&o), 0);
    let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(entries.len(), 1);
}

#[test]
fn report_draws_one_ks_figure_per_coordinate() {
    let dir = tempfile::tempdir().unwrap();
    let body = HOMOGENIZE
        .replace("fields = [\"sin_plus_two\"]", "fields = [\"sin_plus_two\", \"cos\"]")
        .replace("x0 = [0.0]", "x0 = [0.0, 0.5]")
        .replace("hermite:3\"]", "hermite:3\", \"hermite:4\"]");
    let (o, out) = run_config(dir.path(), &body, &[]);
    assert!(code(&o) <= 1, "{}", String::from_utf8_lossy(&o.stderr));
    let r = slowfast(&["report", out.join("manifest.json").to_str().unwrap()], &[]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    for f in ["ks_vs_eps_x0.svg", "ks_vs_eps_x1.svg", "checks.svg"] {
        let svg = std::fs::read_to_string(out.join(f)).unwrap();
        assert!(svg.starts_with("<svg"), "{f}");
    }
}

#[test]
fn report_draws_clt_covariance() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run_config(dir.path(), CLT, &[]);
    assert!(code(&o) <= 1);
    let r = slowfast(&["report", out.join("manifest.json").to_str().unwrap()], &[]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    assert!(out.join("covariance.svg").exists());
}
