use std::path::{Path, PathBuf};
use std::process::Command;

fn qgate() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qgate"));
    cmd.env_remove("QGATE_OUT");
    cmd
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

#[test]
fn run_custom_problem_writes_logs_and_summary() {
    let out = tempfile::tempdir().unwrap();
    let status = qgate()
        .args([
            "run",
            configs().join("qubit-hadamard.toml").to_str().unwrap(),
        ])
        .args(["--out", out.path().to_str().unwrap(), "--workers", "2"])
        .output()
        .unwrap();
    assert_eq!(
        status.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let log = out.path().join("custom_newton_seed1.csv");
    let text = std::fs::read_to_string(log).unwrap();
    assert!(text.starts_with(
        "iter,gate_error,geodesic_error,pulse_norm,radius,ratio,accepted,wall_seconds\n"
    ));
    assert!(out.path().join("custom_newton_seed1_spectrum.csv").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["runs"][0]["status"], "Converged");
    assert!(summary["runs"][0]["final_gate_error"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn output_directory_from_environment_and_seed_offset() {
    let out = tempfile::tempdir().unwrap();
    let status = qgate()
        .env("QGATE_OUT", out.path())
        .args([
            "run",
            configs().join("qubit-hadamard.toml").to_str().unwrap(),
            "--seed-offset",
            "5",
        ])
        .output()
        .unwrap();
    assert!(status.status.success());
    assert!(out.path().join("custom_newton_seed6.csv").exists());
}

#[test]
fn unconverged_runs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("qubit-hadamard.toml"))
        .unwrap()
        .replace("max_iter = 100", "max_iter = 1")
        .replace("matrices/", &format!("{}/matrices/", configs().display()));
    let cfg = dir.path().join("short.toml");
    std::fs::write(&cfg, text).unwrap();
    let status = qgate()
        .args([
            "run",
            cfg.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(1));
}

#[test]
fn malformed_config_is_diagnosed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[problem]\npreset = \"ising-qft\"\nk = \"many\"\n").unwrap();
    let out = qgate()
        .args(["run", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.toml"), "{err}");

    let missing = qgate()
        .args(["run", "/nonexistent/config.toml"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn sweep_writes_one_row_per_cell() {
    let out = tempfile::tempdir().unwrap();
    let status = qgate()
        .args([
            "sweep",
            configs().join("qubit-hadamard.toml").to_str().unwrap(),
        ])
        .args(["--norms", "0.5,2", "--out", out.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert!(status.status.success());
    let csv = std::fs::read_to_string(out.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "norm,seed,ill_conditioning,time_to_eps,final_norm"
    );
    assert_eq!(lines.len(), 3);
}
