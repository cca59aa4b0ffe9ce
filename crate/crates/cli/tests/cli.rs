//! End-to-end checks of the binary: exit codes, emitted files, determinism.

use std::path::Path;
use std::process::Command;

use covertan::experiment::{experiment_to_kv, ExperimentKind, ExperimentSpec};
use covertan::io::write_kv;
use covertan::optimizer::OptimizerOptions;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_covertan"))
}

fn tiny_config(kind: ExperimentKind, path: &Path) {
    let mut spec = ExperimentSpec::<f64>::desk_default(kind, 5).unwrap();
    spec.base.t = 16;
    spec.opts = OptimizerOptions::desk_default(16, 5);
    spec.opts.m_l = 32;
    spec.opts.max_epochs = 2;
    spec.opts.grad_tol = 0.0;
    spec.convergence_p = vec![3, 6];
    spec.sweep_n = vec![6, 12];
    spec.sweep_pj_dbm = vec![0.0, 10.0];
    spec.eval_seed = 5;
    write_kv(&experiment_to_kv(&spec), path).unwrap();
}

#[test]
fn geometry_selftest_passes() {
    let out = bin().arg("geometry-selftest").output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "selftest failed:\n{stdout}");
    assert!(stdout.contains("PASS projection tangency"));
    assert!(stdout.contains("all checks passed"));
}

#[test]
fn convergence_runs_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.conf");
    tiny_config(ExperimentKind::Convergence, &cfg);

    let out1 = dir.path().join("run1");
    let out2 = dir.path().join("run2");
    for out in [&out1, &out2] {
        let res = bin()
            .args(["convergence", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .output()
            .unwrap();
        assert!(
            res.status.success(),
            "stderr: {}",
            String::from_utf8_lossy(&res.stderr)
        );
    }
    for name in ["trace_n18_p3.csv", "trace_n18_p6.csv", "manifest.txt"] {
        let a = std::fs::read_to_string(out1.join(name)).unwrap();
        let b = std::fs::read_to_string(out2.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }

    // the emitted manifest is itself a valid --config
    let out3 = dir.path().join("run3");
    let res = bin()
        .args(["convergence", "--config"])
        .arg(out1.join("manifest.txt"))
        .arg("--out")
        .arg(&out3)
        .output()
        .unwrap();
    assert!(res.status.success());
    assert_eq!(
        std::fs::read_to_string(out1.join("trace_n18_p6.csv")).unwrap(),
        std::fs::read_to_string(out3.join("trace_n18_p6.csv")).unwrap(),
        "manifest replay diverged"
    );
}

#[test]
fn sweep_pj_emits_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.conf");
    tiny_config(ExperimentKind::SweepPj, &cfg);
    let out = dir.path().join("out");
    let res = bin()
        .args(["sweep-pj", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--threads", "2"])
        .output()
        .unwrap();
    assert!(
        res.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&res.stderr)
    );
    let mut rdr = csv::Reader::from_path(out.join("summary_sweep_pj.csv")).unwrap();
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        vec!["n", "p", "Pj_dbm", "Pi_db", "pe_lower", "covert_rate"]
    );
    assert_eq!(rdr.records().count(), 2);
    assert!(out.join("pa_zero_check.csv").exists());
}

#[test]
fn invalid_inputs_exit_one() {
    // missing config file
    let res = bin()
        .args(["sweep-n", "--config", "/nonexistent/exp.conf"])
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(1));

    // config with a non-integer p under the rule
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.conf");
    let mut spec = ExperimentSpec::<f64>::desk_default(ExperimentKind::SweepN, 5).unwrap();
    spec.base.t = 8;
    spec.opts = OptimizerOptions::desk_default(8, 5);
    spec.sweep_n = vec![7];
    // bypass validation by writing the raw key-value form
    write_kv(&experiment_to_kv(&spec), &cfg).unwrap();
    let res = bin()
        .args(["sweep-n", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(1));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("divisible"), "stderr: {err}");
}

#[test]
fn unknown_variant_rejected() {
    let res = bin()
        .args(["convergence", "--variant", "adam"])
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(1), "usage errors are validation errors");
}
