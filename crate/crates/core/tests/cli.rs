use std::process::Command;

fn cb() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cb"))
}

#[test]
fn list_names_every_scenario() {
    let out = cb().arg("list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for s in ["mean-simple", "softthresh-mean", "lr-joint", "lr-marginal", "lasso-sim", "lasso-diabetes", "vonmises-dr"] {
        assert!(text.lines().any(|l| l == s), "{s}");
    }
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = cb()
        .args(["run", "mean-simple", "--seed", "4", "--ra-t", "500", "--draws", "300", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["scenario"], "mean-simple");
    assert_eq!(report["config"]["ra"]["max_iter"], 500);
    assert!(dir.path().join("timing.json").exists());
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# small run\nscenario = mean-simple\nseed = 9\nra.t = 200\ndraws = 100\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = cb()
        .args(["run", "mean-simple", "--config"])
        .arg(&cfg)
        .args(["--ra-t", "300", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 9);
    assert_eq!(report["config"]["ra"]["max_iter"], 300);
}

#[test]
fn errors_are_json_with_nonzero_exit() {
    let out = cb().args(["run", "lasso-diabetes", "--seed", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert_eq!(err["error"], "config");
    assert!(err["message"].as_str().unwrap().contains("--data"));

    let out = cb().args(["run", "mean-simple", "--seed", "x"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert_eq!(err["error"], "config");

    let out = cb().args(["run", "no-such-scenario"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn missing_data_file_is_an_io_error() {
    let out = cb()
        .args(["run", "lasso-diabetes", "--seed", "1", "--data", "/nonexistent/diabetes.csv"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert_eq!(err["error"], "io");
}
