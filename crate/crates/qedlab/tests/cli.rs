//! End-to-end checks of the qedlab binary: exit codes, file outputs, header
//! safety, and bit-for-bit reproducibility of sweep outputs.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qedlab"))
}

const SMALL_K1: &str = r#"
[limits]
lambda = [1.0]
mu = [1.0]
theta = [0.5]
lambda_hat = [0.0]
mu_hat = [1.0]
c2u = [1.0]
gamma = 1.0

[cost]
kind = "linear_queue"
coeffs = [1.0]

[grid]
box_halfwidth = 4.0
points_per_axis = 41

[experiment]
x0 = [0.5]
sweep_n = [5, 10]
policies = ["pscp", "nscp1", "prio:1", "cmu"]
reps = 40
base_seed = 12001

[sde]
dt = 0.005
reps = 200
"#;

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn solve_writes_grid_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_K1);
    let grid = dir.path().join("grid.csv");
    let out = bin()
        .args(["solve", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&grid)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("max interior residual"));
    assert!(stdout.contains("V((0.5)) ="));
    let vg = qedlab::hjb::ValueGrid::load_csv(&grid).unwrap();
    assert_eq!(vg.k, 1);
    assert_eq!(vg.spec.points_per_axis, 41);
}

#[test]
fn malformed_config_exits_2_with_balance_message() {
    let dir = tempfile::tempdir().unwrap();
    let broken = SMALL_K1.replace("lambda = [1.0]", "lambda = [0.7]");
    let cfg = write_config(dir.path(), &broken);
    let out = bin().args(["solve", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("balance violation"), "stderr: {stderr}");
}

#[test]
fn sweep_is_reproducible_and_append_safe() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_K1);
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    for out in [&out_a, &out_b] {
        let res = bin()
            .args(["sweep", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .output()
            .unwrap();
        assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    }
    let a = std::fs::read(&out_a).unwrap();
    let b = std::fs::read(&out_b).unwrap();
    assert_eq!(a, b, "identical configs and seeds must reproduce every cell");

    // appending to an existing file keeps one header
    let res = bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_a)
        .output()
        .unwrap();
    assert!(res.status.success());
    let text = std::fs::read_to_string(&out_a).unwrap();
    let headers = text
        .lines()
        .filter(|l| l.starts_with("experiment_id,"))
        .count();
    assert_eq!(headers, 1);
    let single = std::fs::read_to_string(&out_b).unwrap().lines().count();
    assert_eq!(text.lines().count(), 2 * (single - 1) + 1);

    // a file with a foreign header is refused
    let foreign = dir.path().join("foreign.csv");
    std::fs::write(&foreign, "a,b,c\n1,2,3\n").unwrap();
    let res = bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&foreign)
        .output()
        .unwrap();
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("header mismatch"));
}

#[test]
fn empty_sweep_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let empty = SMALL_K1.replace("sweep_n = [5, 10]", "sweep_n = []");
    let cfg = write_config(dir.path(), &empty);
    let out = dir.path().join("empty.csv");
    let res = bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(res.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.trim(), qedlab::cli::SWEEP_HEADER);
}

#[test]
fn audit_passes_on_shipped_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_K1);
    let res = bin().args(["audit", "--config"]).arg(&cfg).output().unwrap();
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(res.status.success(), "stdout: {stdout}");
    assert!(stdout.contains("PASS theta_round"));
    assert!(stdout.contains("PASS seed_replay"));
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn simulate_appends_replication_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_K1);
    let out = dir.path().join("sim.csv");
    let res = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .args(["--n", "10", "--policy", "cmu", "--reps", "5"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), qedlab::cli::SIM_HEADER);
    assert_eq!(lines.count(), 5);

    // diffusion rows share the schema with n = "diffusion"
    let res = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .args(["--n", "diffusion", "--policy", "pscp", "--reps", "3"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let diffusion_rows = text.lines().filter(|l| l.contains(",diffusion,")).count();
    assert_eq!(diffusion_rows, 3);
}
