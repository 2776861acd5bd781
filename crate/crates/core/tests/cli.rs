use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], config: Option<&str>, dir: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_resonant"));
    cmd.args(args);
    if let Some(text) = config {
        let path = dir.join("scenario.cfg");
        std::fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn capacity_run_writes_json_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("nested/deeper/cap");
    let o = run(
        &["capacity", "--out", out.to_str().unwrap()],
        Some("resolution = 12\n"),
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cap = json(&out.join("capacity.json"));
    let c = cap["capacity"].as_f64().unwrap();
    assert!((c - 2.0).abs() < 0.02, "{c}");
    let manifest = json(&out.join("manifest.json"));
    let files: Vec<&str> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["file"].as_str().unwrap())
        .collect();
    assert_eq!(files, vec!["capacity.json", "density.csv"]);
}

#[test]
fn two_resonators_give_four_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("res");
    let o = run(
        &["resonances", "--out", out.to_str().unwrap()],
        Some("epsilon = 1e-2\ncenters = 0,0; 3,0\n"),
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("resonances.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5, "{csv}");
}

#[test]
fn manifest_is_stable_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "epsilon = 1e-2\ncenters = 0,0; 2,1; -1,2\n";
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(run(
        &["resonances", "--out", a.to_str().unwrap()],
        Some(cfg),
        tmp.path()
    )
    .status
    .success());
    assert!(run(
        &["resonances", "--out", b.to_str().unwrap()],
        Some(cfg),
        tmp.path()
    )
    .status
    .success());
    let read = |d: &Path| std::fs::read_to_string(d.join("manifest.json")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn parameter_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    let out = out.to_str().unwrap();
    let o = run(
        &["resonances", "--out", out],
        Some("epsilon = -1e-2\ncenters = 0,0\n"),
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    let o = run(
        &["resonances", "--out", out],
        Some("centers = 0,0\n"),
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("epsilon"));
    let o = run(
        &["resonances", "--out", out],
        Some("epsilon = 1e-2\ncenters = 0,0\nbogus = 1\n"),
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    let o = run(
        &["resonances", "--out", out],
        Some("epsilon = 1e-2\ncenters = 0,0; 0.001,0\n"),
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn integrals_subcommand_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ints");
    let o = run(
        &[
            "validate-integrals",
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "3",
        ],
        None,
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&out.join("manifest.json"))["seed"].as_u64(), Some(3));
    assert!(out.join("integrals.csv").exists());
}
