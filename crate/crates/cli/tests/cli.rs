use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_overlapscope"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env_remove("OVERLAPSCOPE_THREADS")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn prototype_design_is_feasible() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["design"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["violations"].as_array().unwrap().len(), 0);
    assert!(dir.path().join("run.json").exists());
}

#[test]
fn overlapping_fovs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("design.json");
    let doc = serde_json::json!({
        "design": {"n": 7, "d_o": 1.2, "d_i": 30.0, "w": 3.7, "a_o": 4.0, "na": 0.25, "d_x": 2.0, "array_width": 11.1},
        "sensor": {"n_bit": 8, "v": 10000.0, "pixel_size": 2.2, "width_mm": 5.7, "pixel_count": 5.0}
    });
    fs::write(&cfg, doc.to_string()).unwrap();
    let o = run(&["design", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error: kind=design-violation message="), "{}", stderr(&o));
    assert!(stderr(&o).contains("object FOVs overlap"));
}

#[test]
fn malformed_design_json_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("design.json");
    fs::write(&cfg, "{\"design\": [").unwrap();
    let o = run(&["design", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("kind=json"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["design", "--n-bit", "eight"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["phantom", "--n", "0"], dir.path()).status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_overlapscope"))
        .args(["design", "--out-dir"])
        .arg(dir.path())
        .env("OVERLAPSCOPE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("OVERLAPSCOPE_THREADS"));
}

#[test]
fn help_states_units() {
    let o = Command::new(env!("CARGO_BIN_EXE_overlapscope")).args(["overlap", "--help"]).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    for flag in ["--seed", "--n", "--n-bit", "--well-depth", "--patch-size", "--inner-fraction", "--out-dir"] {
        assert!(text.contains(flag), "{flag} missing");
    }
    assert!(text.contains("(photoelectrons)") && text.contains("(pixels)") && text.contains("(bits)"));
    let o = Command::new(env!("CARGO_BIN_EXE_overlapscope")).args(["train", "--help"]).output().unwrap();
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("--epochs") && text.contains("--lr"));
    let o = Command::new(env!("CARGO_BIN_EXE_overlapscope")).args(["sweep", "--help"]).output().unwrap();
    assert!(String::from_utf8(o.stdout).unwrap().contains("--n-list"));
    let o = Command::new(env!("CARGO_BIN_EXE_overlapscope")).args(["heatmap", "--help"]).output().unwrap();
    assert!(String::from_utf8(o.stdout).unwrap().contains("--step"));
}

#[test]
fn oracle_writes_results_within_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["oracle", "--seed", "3", "--n-list", "2,7", "--lambda-list", "500", "--trials", "200000"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("oracle.json")).unwrap()).unwrap();
    assert!(doc.to_string().contains("500"));
}

#[test]
fn phantom_writes_frames_and_overlaps() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["phantom", "--seed", "1", "--n", "2", "--frames", "4", "--frame-size", "256", "--targets", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let dense = run(&["phantom", "--frames", "1", "--frame-size", "128", "--targets", "3"], dir.path());
    assert_eq!(dense.status.code(), Some(2));
    assert!(stderr(&dense).contains("not sparse"));
    assert_eq!(fs::read_dir(dir.path().join("frames")).unwrap().count(), 4);
    assert!(dir.path().join("annotations.csv").exists());
    assert!(dir.path().join("overlapped_annotations.csv").exists());
    assert!(fs::read_dir(dir.path().join("overlapped")).unwrap().count() >= 1);
}
