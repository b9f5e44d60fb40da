//! Black-box tests of the `lab` binary: artifact layout, summary format,
//! exit codes, environment-variable handling, and run-to-run determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn lab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lab"))
}

const TINY_CONFIG: &str = r#"
[domain]
dim = 1
h = 0.05
boundary = "dirichlet"
region = { kind = "box", min = [-5.0], max = [5.0] }

[target]
geometry = "euclidean"
dim = 1

[potential]
kind = "double_well_radial"

[initial]
kind = "kink"

[flow]
enabled = true
tol = 1.0e-6
dt_safety = 0.4

[diagnostics]
p_function = true

[[assert]]
name = "flow-converged"
kind = "converged"

[[assert]]
name = "modica-p-bound"
kind = "p_max_below"
value = 1.0e-3
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn run_writes_artifacts_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tiny.toml", TINY_CONFIG);
    let art = dir.path().join("art");
    let out = run_ok(lab().arg("run").arg(&cfg).arg("--out").arg(&art));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("PASS flow-converged"));
    assert!(stdout.contains("PASS modica-p-bound"));
    for name in [
        "config.toml",
        "flow_history.csv",
        "p_field.csv",
        "final_field.csv",
        "report.json",
        "summary.txt",
    ] {
        assert!(art.join(name).exists(), "missing {name}");
    }
    let summary = std::fs::read_to_string(art.join("summary.txt")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    let report = std::fs::read_to_string(art.join("report.json")).unwrap();
    assert!(report.contains("\"schema_version\""));
}

#[test]
fn artifact_root_env_var_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tiny.toml", TINY_CONFIG);
    let root = dir.path().join("root");
    run_ok(lab().arg("run").arg(&cfg).env("LAB_ARTIFACT_DIR", &root));
    assert!(root.join("tiny").join("report.json").exists());
}

#[test]
fn failed_assertion_sets_generic_failure_exit() {
    let dir = tempfile::tempdir().unwrap();
    let text = TINY_CONFIG.replace("value = 1.0e-3", "value = 0.0");
    let cfg = write_config(dir.path(), "failing.toml", &text);
    let out = lab()
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("art"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL modica-p-bound"));
}

#[test]
fn parse_error_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "broken.toml", "this is { not toml");
    let out = lab().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validation_error_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = TINY_CONFIG.replace("dim = 1\nh", "dim = 7\nh");
    let cfg = write_config(dir.path(), "invalid.toml", &text);
    let out = lab().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn chart_exit_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    // Constant map near the chart rim of the hyperbolic disk, pushed
    // outward by a potential that grows with distance.
    let text = r#"
[domain]
dim = 1
h = 0.1
boundary = "free"
region = { kind = "box", min = [0.0], max = [1.0] }

[target]
geometry = "hyperbolic_poincare"
dim = 2

[potential]
kind = "quadratic_radial"
c = 5.0

[initial]
kind = "constant"
value = [0.9, 0.0]

[flow]
enabled = true
"#;
    let cfg = write_config(dir.path(), "exit.toml", text);
    let out = lab().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn instability_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    // Mildly unstable timestep: growth is caught by the energy audit before
    // the values overflow (a far larger factor would blow past chart
    // validity first and exit 4 instead).
    let text = TINY_CONFIG.replace("dt_safety = 0.4", "dt_safety = 3.0");
    let cfg = write_config(dir.path(), "unstable.toml", &text);
    let out = lab().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tiny.toml", TINY_CONFIG);
    for sub in ["a", "b"] {
        run_ok(lab().arg("run").arg(&cfg).arg("--out").arg(dir.path().join(sub)));
    }
    let a = std::fs::read(dir.path().join("a/report.json")).unwrap();
    let b = std::fs::read(dir.path().join("b/report.json")).unwrap();
    assert!(!a.is_empty() && a == b);
}

#[test]
fn suite_aggregates_configs() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "tiny.toml", TINY_CONFIG);
    let manifest = write_config(dir.path(), "suite.toml", "configs = [\"tiny.toml\"]\n");
    let out = run_ok(
        lab().arg("suite").arg(&manifest).arg("--out").arg(dir.path().join("art")),
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("== tiny"));
    assert!(dir.path().join("art/tiny/report.json").exists());
    assert!(dir.path().join("art/summary.txt").exists());
}

#[test]
fn refine_reports_orders() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
[domain]
dim = 1
h = 0.02
boundary = "dirichlet"
region = { kind = "box", min = [-5.0], max = [5.0] }

[target]
geometry = "euclidean"
dim = 1

[potential]
kind = "double_well_radial"

[initial]
kind = "kink"

[diagnostics]
bochner = true

[refine]
metrics = ["bochner_sup"]
order_min = 1.8
order_max = 2.6
"#;
    let cfg = write_config(dir.path(), "refine.toml", text);
    let art = dir.path().join("art");
    let out = run_ok(
        lab().arg("refine").arg(&cfg).arg("--levels").arg("3").arg("--out").arg(&art),
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("PASS refinement-orders"));
    assert!(art.join("refine.json").exists());
}

#[test]
fn geodesic_subcommand_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("trajectory.csv");
    let out = run_ok(
        lab()
            .args(["geodesic", "--geometry", "sphere-stereographic", "--target-dim", "2"])
            .args(["--position", "0,0", "--velocity", "0.5,0"])
            .args(["--dt", "0.001", "--t-end", "5"])
            .arg("--out")
            .arg(&csv),
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("max energy drift"));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("time,y1,y2,v1,v2,energy"));
    assert!(text.lines().count() > 1000);
}
