mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use topomlp::config::KEYS;

fn topomlp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_topomlp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(args: &[&str]) -> String {
    let o = topomlp(args);
    assert!(o.status.success(), "{args:?} failed: {}", stderr(&o));
    stdout(&o)
}

fn synthetic(dir: &Path) -> String {
    let d = dir.join("bundle");
    ok(&["make-synthetic", "--out", d.to_str().unwrap(), "--feature-noise", "0.1", "--seed", "1"]);
    d.to_str().unwrap().to_string()
}

#[test]
fn help_documents_every_subcommand_and_key() {
    let top = ok(&["--help"]);
    for sub in ["build-complex", "train", "eval", "bench", "noise-sweep", "make-synthetic"] {
        assert!(top.contains(sub), "top-level help misses {sub}");
    }
    for sub in ["train", "bench", "noise-sweep"] {
        let help = ok(&[sub, "--help"]);
        for (key, _) in KEYS {
            assert!(help.contains(key), "`{sub} --help` misses key {key}");
        }
        for flag in ["--config", "--set", "--data", "--seeds", "--epochs", "--run-dir", "--out-root"] {
            assert!(help.contains(flag), "`{sub} --help` misses {flag}");
        }
    }
    let flags: [(&str, &[&str]); 3] = [
        ("build-complex", &["--data", "--run-dir"]),
        ("eval", &["--run-dir", "--split", "--data", "--seed"]),
        (
            "make-synthetic",
            &["--out", "--communities", "--nodes-per", "--p-in", "--p-out", "--feature-noise", "--extra-dims", "--seed"],
        ),
    ];
    for (sub, expected) in flags {
        let help = ok(&[sub, "--help"]);
        for flag in expected {
            assert!(help.contains(flag), "`{sub} --help` misses {flag}");
        }
    }
}

#[test]
fn build_complex_reports_counts_and_writes_matrices() {
    let tmp = tempfile::tempdir().unwrap();
    let k3 = common::k3_fixture(&tmp.path().join("k3"));
    let out = tmp.path().join("k3-out");
    let text = ok(&["build-complex", "--data", k3.to_str().unwrap(), "--run-dir", out.to_str().unwrap()]);
    assert!(text.contains("3 vertices, 3 edges, 1 triangle"), "{text}");
    for f in ["counts.txt", "a0.coo", "b1.coo", "b2.coo", "b02.coo", "l0.coo", "l1.coo", "l2.coo"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let b2 = fs::read_to_string(out.join("b2.coo")).unwrap();
    assert!(b2.starts_with("# 3 x 1, 3 nonzeros"), "{b2}");

    let square = common::square_fixture(&tmp.path().join("square"));
    let out = tmp.path().join("square-out");
    let text = ok(&["build-complex", "--data", square.to_str().unwrap(), "--run-dir", out.to_str().unwrap()]);
    assert!(text.contains("4 vertices, 4 edges, 0 triangles"), "{text}");
}

#[test]
fn train_then_eval() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synthetic(tmp.path());
    let run = tmp.path().join("run");
    let text = ok(&[
        "train", "--model", "topo", "--data", &data, "--epochs", "60", "--set", "hidden=32", "--run-dir",
        run.to_str().unwrap(),
    ]);
    assert!(text.contains("test_accuracy="), "{text}");
    for f in ["config", "history.csv", "best.ckpt", "metrics.json", "results.csv", "table.txt"] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    let metrics: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("metrics.json")).unwrap()).unwrap();
    let acc = metrics["test_accuracy"].as_f64().expect("test_accuracy present");
    assert!((0.0..=1.0).contains(&acc));

    let history = fs::read_to_string(run.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 61);
    assert!(fs::read_to_string(run.join("config")).unwrap().contains("hidden=32"));

    let eval = ok(&["eval", "--run-dir", run.to_str().unwrap(), "--split", "test"]);
    assert!(eval.contains(&format!("accuracy={acc}")), "{eval} vs {acc}");
    assert!(run.join("eval-test.json").is_file());
}

#[test]
fn train_creates_timestamped_run_dirs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synthetic(tmp.path());
    let root = tmp.path().join("runs");
    for _ in 0..2 {
        ok(&[
            "train", "--model", "base", "--data", &data, "--epochs", "5", "--set", "hidden=8", "--out-root",
            root.to_str().unwrap(),
        ]);
    }
    let dirs: Vec<String> = fs::read_dir(&root)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(dirs.len(), 2, "{dirs:?}");
    assert!(dirs.iter().all(|d| d.starts_with("train-")));
}

#[test]
fn noise_sweep_writes_delta_by_model_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synthetic(tmp.path());
    let run = tmp.path().join("sweep");
    ok(&[
        "noise-sweep", "--data", &data, "--deltas", "0,0.1,0.3,0.5", "--seeds", "0", "--epochs", "5", "--set",
        "hidden=8", "--run-dir", run.to_str().unwrap(),
    ]);
    let csv = fs::read_to_string(run.join("noise_sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("delta,model,seed,accuracy"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 12);
    let deltas: std::collections::BTreeSet<&str> = rows.iter().map(|r| r[0]).collect();
    let models: std::collections::BTreeSet<&str> = rows.iter().map(|r| r[1]).collect();
    assert_eq!(deltas.len(), 4);
    assert_eq!(models.into_iter().collect::<Vec<_>>(), ["base", "mlp", "topo"]);
    let dat = fs::read_to_string(run.join("noise_sweep.dat")).unwrap();
    assert_eq!(dat.lines().filter(|l| !l.starts_with('#')).count(), 4);
}

#[test]
fn bench_prints_ratio_for_trained_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synthetic(tmp.path());
    let topo = tmp.path().join("topo");
    let base = tmp.path().join("base");
    for (model, dir) in [("topo", &topo), ("base", &base)] {
        ok(&[
            "train", "--model", model, "--data", &data, "--epochs", "5", "--set", "hidden=16", "--run-dir",
            dir.to_str().unwrap(),
        ]);
    }
    let out = tmp.path().join("bench");
    let text = ok(&[
        "bench", "--data", &data, "--topo-run", topo.to_str().unwrap(), "--base-run", base.to_str().unwrap(),
        "--runs", "5", "--warmup", "1", "--set", "hidden=16", "--run-dir", out.to_str().unwrap(),
    ]);
    assert!(text.contains("ratio topo/base ="), "{text}");
    let bench: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("bench.json")).unwrap()).unwrap();
    assert!(bench["ratio"].as_f64().unwrap() > 0.0);
    assert_eq!(bench["topo"]["hidden_multiplies"], 2);
    assert_eq!(bench["base"]["hidden_multiplies"], 6);

    // Swapped runs are rejected.
    let o = topomlp(&["bench", "--data", &data, "--topo-run", base.to_str().unwrap(), "--run-dir", out.to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn failures_print_one_error_line() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope");
    let cases: [(&[&str], &str); 4] = [
        (&["train", "--data", missing.to_str().unwrap()], "error[missing_file]"),
        (&["train", "--set", "nonsense=1"], "error[config]"),
        (&["train"], "error[config]"),
        (&["noise-sweep", "--data", missing.to_str().unwrap(), "--deltas", "0,1.5"], "error[config]"),
    ];
    for (args, prefix) in cases {
        let o = topomlp(args);
        assert!(!o.status.success(), "{args:?} should fail");
        let err = stderr(&o);
        assert_eq!(err.lines().count(), 1, "{args:?}: {err}");
        assert!(err.starts_with(prefix), "{args:?}: {err}");
    }
}
