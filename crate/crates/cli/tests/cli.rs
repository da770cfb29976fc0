//! End-to-end tests of the `mixlab` binary.

use std::path::Path;
use std::process::{Command, Output};

fn mixlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixlab"))
        .args(args)
        .output()
        .expect("spawn mixlab")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn count_rows(path: &Path) -> usize {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().count() - 1 // header
}

fn json_file(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gen_data_writes_the_exact_point_sets() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dots.csv");
    let res = mixlab(&["gen-data", "--name", "three-dots", "--out", out.to_str().unwrap()]);
    assert!(res.status.success());
    assert_eq!(count_rows(&out), 3);

    let out9 = dir.path().join("gauss9.csv");
    let res = mixlab(&[
        "gen-data", "--name", "gauss9", "--n", "100", "--out", out9.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    assert_eq!(count_rows(&out9), 900);
}

#[test]
fn gen_data_rejects_unknown_names_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let res = mixlab(&["gen-data", "--name", "nonsense", "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn train_writes_manifest_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("circle.csv");
    assert!(mixlab(&[
        "gen-data", "--name", "circle", "--n", "30", "--seed", "1",
        "--out", data.to_str().unwrap(),
    ])
    .status
    .success());

    let run = |out_dir: &Path| {
        let res = mixlab(&[
            "train",
            "--dataset", data.to_str().unwrap(),
            "--method", "mixup",
            "--model", "logreg",
            "--epochs", "5",
            "--seed", "3",
            "--out-dir", out_dir.to_str().unwrap(),
        ]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    };
    let (d1, d2) = (dir.path().join("r1"), dir.path().join("r2"));
    run(&d1);
    run(&d2);

    let manifest = json_file(&d1.join("manifest.json"));
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["seed"], 3);
    assert!(manifest["dataset_fingerprint"]
        .as_str()
        .unwrap()
        .starts_with("sha256:"));
    assert!(manifest["metrics"]["clean_accuracy"].as_f64().is_some());
    assert!(d1.join("model.json").exists());

    // byte-identical checkpoints across reruns of the same configuration
    let m1 = std::fs::read(d1.join("model.json")).unwrap();
    let m2 = std::fs::read(d2.join("model.json")).unwrap();
    assert_eq!(m1, m2);
}

#[test]
fn train_rejects_missing_dataset_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let res = mixlab(&[
        "train",
        "--dataset", "/nonexistent/data.csv",
        "--out-dir", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn cv_reports_the_selected_cell() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("circle.csv");
    assert!(mixlab(&[
        "gen-data", "--name", "circle", "--n", "30", "--seed", "1",
        "--out", data.to_str().unwrap(),
    ])
    .status
    .success());
    let res = mixlab(&[
        "cv",
        "--dataset", data.to_str().unwrap(),
        "--method", "genlabel-input",
        "--model", "logreg",
        "--epochs", "2",
        "--out-dir", dir.path().to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report = json_file(&dir.path().join("cv_report.json"));
    assert_eq!(report["runs"], 72);
    let gamma = report["selected_gamma"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&gamma));
    assert!(report["selected_gen_kind"].is_string());
}

#[test]
fn attack_at_epsilon_zero_matches_clean_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("circle.csv");
    assert!(mixlab(&[
        "gen-data", "--name", "circle", "--n", "30", "--seed", "1",
        "--out", data.to_str().unwrap(),
    ])
    .status
    .success());
    let model_dir = dir.path().join("run");
    assert!(mixlab(&[
        "train",
        "--dataset", data.to_str().unwrap(),
        "--method", "vanilla",
        "--model", "logreg",
        "--epochs", "10",
        "--out-dir", model_dir.to_str().unwrap(),
    ])
    .status
    .success());
    let model = model_dir.join("model.json");

    let eval = mixlab(&[
        "eval", "--model", model.to_str().unwrap(), "--data", data.to_str().unwrap(),
    ]);
    assert!(eval.status.success());
    let clean: serde_json::Value = serde_json::from_str(&stdout(&eval)).unwrap();

    let attack = mixlab(&[
        "attack",
        "--model", model.to_str().unwrap(),
        "--data", data.to_str().unwrap(),
        "--epsilon", "0",
    ]);
    assert!(attack.status.success());
    let robust: serde_json::Value = serde_json::from_str(&stdout(&attack)).unwrap();
    assert_eq!(
        robust["robust_accuracy"].as_f64().unwrap(),
        clean["clean_accuracy"].as_f64().unwrap()
    );
}

#[test]
fn theory_example1_prints_both_optima() {
    let res = mixlab(&["theory", "--preset", "example1"]);
    assert!(res.status.success());
    let text = stdout(&res);
    assert!(text.contains("0.4375"), "{text}");
    assert!(text.contains("0.5000"), "{text}");
}
