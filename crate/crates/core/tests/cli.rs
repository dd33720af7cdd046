//! End-to-end runs of the `ptcflow` binary on a tiny backward-facing step.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SUITE: &str = "\
[suite]
name = tiny
strategies = iter, an
tol = 1e-6
max_iter = 60
snapshots = 1, 2, 3

[case step-a]
family = S
geometry = backstep 0.05 0.05 0.08 0.1
h_max = 0.04
velocity = 0.001

[case step-b]
family = S
geometry = backstep 0.05 0.05 0.08 0.1
h_max = 0.03
velocity = 0.002
";

fn ptcflow(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_ptcflow"))
        .args(args)
        .env("PTCFLOW_WORKERS", "1")
        .output()
        .unwrap();
    eprintln!("$ ptcflow {}\n{}{}", args.join(" "), String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn mesh_solve_bench_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.cfg");
    fs::write(&cfg, SUITE).unwrap();

    let meshes = dir.path().join("meshes");
    let out = ptcflow(&["mesh", "--config", p(&cfg), "--out", p(&meshes)]);
    assert!(out.status.success());
    assert!(meshes.join("step-a.mesh").is_file() && meshes.join("step-b.mesh").is_file());

    let hist = dir.path().join("step-a.csv");
    let out = ptcflow(&["solve", "--config", p(&cfg), "--case", "step-a", "--out", p(&hist)]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("step-a iter: converged"));
    assert!(fs::read_to_string(&hist).unwrap().lines().count() > 2);

    let bench = dir.path().join("bench");
    let out = ptcflow(&["bench", "--config", p(&cfg), "--out", p(&bench)]);
    assert!(out.status.success());
    let summary = fs::read_to_string(bench.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3, "{summary}");
    assert!(bench.join("runs/index.csv").is_file());
    assert!(bench.join("plots/S.svg").is_file());

    let replot = dir.path().join("replot");
    let out = ptcflow(&["plot", "--runs", p(&bench), "--out", p(&replot)]);
    assert!(out.status.success());
    assert!(replot.join("S.svg").is_file());
}

#[test]
fn data_train_and_learned_bench() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.cfg");
    fs::write(&cfg, SUITE).unwrap();

    let data = dir.path().join("data");
    let out = ptcflow(&["gen-data", "--config", p(&cfg), "--seed", "1", "--max-evals", "30", "--out", p(&data)]);
    assert!(out.status.success());
    for f in ["data.csv", "train.csv", "validation.csv", "test.csv", "manifest.txt"] {
        assert!(data.join(f).is_file(), "missing {f}");
    }

    let model = dir.path().join("model.txt");
    let out = ptcflow(&[
        "train", "--data", p(&data), "--hidden", "8,8", "--max-epochs", "30", "--out", p(&model),
    ]);
    assert!(out.status.success());
    assert!(model.is_file());

    let bench = dir.path().join("bench");
    let out = ptcflow(&[
        "bench", "--config", p(&cfg), "--model", p(&model), "--strategies", "nn,iter", "--out", p(&bench),
    ]);
    // The learned controller may or may not converge; it must at least run.
    assert!(out.status.success());
    let header = fs::read_to_string(bench.join("summary.csv")).unwrap();
    assert!(header.starts_with("case_id,family,nn_iterations"), "{header}");
}

#[test]
fn usage_errors() {
    let out = ptcflow(&["bench", "--preset", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    let out = ptcflow(&["solve", "--preset", "desk", "--case", "B1-h0.0206-u0.001", "--strategy", "nn"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--model"));
}
