use std::path::Path;
use std::process::{Command, Output};

use qperturb::io::{save_ensemble, EnsembleFormat, ExperimentEnsemble};
use qperturb::pauli::{bell_state, BellLabel};

fn qperturb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qperturb"))
        .args(args)
        .env_remove("QPERTURB_OUT_DIR")
        .output()
        .unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = qperturb(&[
        "generate",
        "--seed",
        "3",
        "--case",
        "2",
        "--samples",
        "40",
        "--out-dir",
        path_str(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in [
        "samples.csv",
        "etas_raw.csv",
        "etas_constrained.csv",
        "corr.csv",
        "summary.json",
    ] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn generate_all_cases_uses_subdirectories() {
    let dir = tempfile::tempdir().unwrap();
    let out = qperturb(&[
        "generate",
        "--seed",
        "4",
        "--case",
        "all",
        "--samples",
        "20",
        "--out-dir",
        path_str(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for n in 1..=4 {
        assert!(dir.path().join(format!("case{n}")).join("samples.csv").exists());
    }
}

#[test]
fn out_dir_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_qperturb"))
        .args(["generate", "--seed", "5", "--samples", "10"])
        .env("QPERTURB_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn missing_seed_is_a_usage_error() {
    assert_eq!(qperturb(&["generate", "--case", "1"]).status.code(), Some(2));
}

#[test]
fn invalid_sigma_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = qperturb(&[
        "generate",
        "--seed",
        "1",
        "--sigma",
        "-0.1",
        "--out-dir",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unreachable_target_aborts_with_solver_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = qperturb(&[
        "generate",
        "--seed",
        "1",
        "--case",
        "2",
        "--samples",
        "20",
        "--energy-dist",
        "1000,0",
        "--abort-on-failure",
        "--out-dir",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    let redraw = qperturb(&[
        "generate",
        "--seed",
        "1",
        "--case",
        "2",
        "--samples",
        "20",
        "--energy-dist",
        "1000,0",
        "--out-dir",
        path_str(dir.path()),
    ]);
    assert_eq!(redraw.status.code(), Some(3));
}

#[test]
fn measures_and_fit_print_json() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bell.json");
    let ens = ExperimentEnsemble::from_states(vec![bell_state(BellLabel::PhiPlus); 3]);
    save_ensemble(&file, &ens, EnsembleFormat::Json).unwrap();

    let out = qperturb(&["measures", "--state", path_str(&file)]);
    assert!(out.status.success());
    let reports: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 3);
    assert!((reports[0]["concurrence"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert!((reports[0]["fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-10);

    let out = qperturb(&["fit", "--experiment", path_str(&file)]);
    assert!(out.status.success());
    let fit: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(fit["entropy_mean"].as_f64().unwrap().abs() < 1e-10);
}

#[test]
fn malformed_experiment_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.csv");
    std::fs::write(&file, "re00,im00\n1,0\n").unwrap();
    let out = qperturb(&["fit", "--experiment", path_str(&file)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compare_runs_against_an_ensemble_file() {
    let dir = tempfile::tempdir().unwrap();
    let gen_dir = dir.path().join("gen");
    let out = qperturb(&[
        "generate",
        "--seed",
        "8",
        "--bell",
        "phi+",
        "--case",
        "4",
        "--samples",
        "60",
        "--energy-dist",
        "-0.3,0.1",
        "--entropy-dist",
        "0.55,0.05",
        "--out-dir",
        path_str(&gen_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let cmp_dir = dir.path().join("cmp");
    let out = qperturb(&[
        "compare",
        "--seed",
        "9",
        "--experiment",
        path_str(&gen_dir.join("states.json")),
        "--samples",
        "60",
        "--out-dir",
        path_str(&cmp_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let overlap: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(overlap.as_array().unwrap().len(), 8);
    assert!(cmp_dir.join("overlap.json").exists());
}

#[test]
fn bell_diagonal_flag_accepts_negative_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let out = qperturb(&[
        "generate",
        "--seed",
        "2",
        "--bell-diag",
        "-0.3,0.5,0.2",
        "--samples",
        "10",
        "--out-dir",
        path_str(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bad = qperturb(&[
        "generate",
        "--seed",
        "2",
        "--bell-diag",
        "0.5,0.2",
        "--out-dir",
        path_str(dir.path()),
    ]);
    assert_eq!(bad.status.code(), Some(2));
}
