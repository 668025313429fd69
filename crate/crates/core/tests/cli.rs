use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn flatchain(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flatchain"))
        .args(args)
        .current_dir(dir)
        .env("FLATCHAIN_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

const VORTEX_SPEC: &str = r#"{
  "target": "S1",
  "domain": {"lo": [0, 0], "hi": [1, 1]},
  "defects": [{"x": [0.3, 0.4], "charge": 1}, {"x": [0.75, 0.6], "charge": -2}],
  "h": 0.1
}"#;

#[test]
fn generate_detect_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("spec.json"), VORTEX_SPEC).unwrap();
    let o = flatchain(
        &["generate", "vortex", "--spec", "spec.json", "--spacing", "0.00625", "--out", "f.fld", "--truth", "t.json"],
        d,
    );
    assert_eq!(stdout_json(&o)["atoms"], 2);

    let o = flatchain(
        &["detect", "--field", "f.fld", "--h", "0.1", "--y", "random", "--seed", "4", "--truth", "t.json", "--out", "s.json"],
        d,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let detected: Value = serde_json::from_str(&fs::read_to_string(d.join("s.json")).unwrap()).unwrap();
    assert_eq!(detected["atoms"].as_array().unwrap().len(), 2);
    assert_eq!(detected["grid"]["h"], 0.1);

    // the detected chain is the truth deformed onto the same grid
    let y: Vec<String> = detected["grid"]["y"].as_array().unwrap().iter().map(|v| v.to_string()).collect();
    let o = flatchain(&["deform", "--chain", "t.json", "--h", "0.1", "--y", &y.join(","), "--out", "p.json"], d);
    assert!(o.status.success());
    let diff = stdout_json(&flatchain(&["chain-diff", "s.json", "p.json", "--mode", "flatsize"], d));
    assert_eq!(diff["value"], 0.0);

    let diff = stdout_json(&flatchain(&["chain-diff", "t.json", "s.json", "--mode", "flat"], d));
    let v = diff["value"].as_f64().unwrap();
    assert!(v > 0.0 && v <= 3.0 * 0.1 * 2f64.sqrt() / 2.0 + 1e-12);

    let e = stdout_json(&flatchain(&["energy", "--field", "f.fld", "--p", "1"], d));
    assert!(e["energy"].as_f64().unwrap() > 0.0);
    let o = flatchain(&["energy", "--field", "f.fld", "--p", "2"], d);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn flatnorm_reports_certificates() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let chain = r#"{"domain": {"lo": [0, 0], "hi": [1, 1]},
        "group": {"group": "int", "scale": 1.0, "exponent": 1.0},
        "atoms": [{"x": [0.4, 0.5], "c": 5}, {"x": [0.5, 0.5], "c": -5}]}"#;
    fs::write(d.join("c.json"), chain).unwrap();
    let fs_ = stdout_json(&flatchain(&["flatnorm", "--mode", "flatsize", "--chain", "c.json"], d));
    assert!((fs_["value"].as_f64().unwrap() - 0.1).abs() < 1e-12);
    assert_eq!(fs_["exact"], true);
    let flow = stdout_json(&flatchain(&["flatnorm", "--mode", "flat", "--chain", "c.json", "--flow"], d));
    let oracle = stdout_json(&flatchain(&["flatnorm", "--mode", "flat", "--chain", "c.json", "--oracle"], d));
    assert!((flow["value"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(flow["value"], oracle["value"]);

    let o = flatchain(&["flatnorm", "--mode", "flat", "--chain", "c.json", "--flow", "--oracle"], d);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn exit_codes_and_error_names() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(flatchain(&["frobnicate"], d).status.code(), Some(2));
    assert_eq!(flatchain(&["deform", "--h", "0.1"], d).status.code(), Some(2));

    let a = r#"{"domain": {"lo": [0, 0], "hi": [1, 1]}, "group": {"group": "int", "scale": 1.0, "exponent": 1.0},
        "atoms": [{"x": [0.4, 0.5], "c": 1}]}"#;
    let b = r#"{"domain": {"lo": [0, 0], "hi": [1, 1]}, "group": {"group": "cyclic", "scale": 1.0, "n": 4},
        "atoms": [{"x": [0.4, 0.5], "c": 1}]}"#;
    fs::write(d.join("a.json"), a).unwrap();
    fs::write(d.join("b.json"), b).unwrap();
    let o = flatchain(&["chain-diff", "a.json", "b.json", "--mode", "flatsize"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("GroupMismatch"));

    fs::write(d.join("close.json"), r#"{"target": "S1", "domain": {"lo": [0, 0], "hi": [1, 1]},
        "defects": [{"x": [0.3, 0.4], "charge": 1}, {"x": [0.35, 0.4], "charge": 1}], "h": 0.1}"#)
        .unwrap();
    let o = flatchain(&["generate", "vortex", "--spec", "close.json", "--spacing", "0.01", "--out", "x.fld"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("DefectTooClose"));
    assert!(!d.join("x.fld").exists());
}

#[test]
fn reports_reproduce_from_their_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let chain = r#"{"domain": {"lo": [0, 0], "hi": [1, 1]}, "group": {"group": "int", "scale": 1.0, "exponent": 1.0},
        "atoms": [{"x": [0.21, 0.33], "c": 2}, {"x": [0.62, 0.48], "c": -1}, {"x": [0.8, 0.9], "c": 3}]}"#;
    fs::write(d.join("c.json"), chain).unwrap();
    let o = flatchain(
        &["deform-scaling", "--chain", "c.json", "--h-list", "0.2,0.1,0.05", "--samples", "30", "--seed", "9", "--out", "r1.csv"],
        d,
    );
    let summary = stdout_json(&o);
    assert_eq!(summary["pass"], true);
    let o = flatchain(&["deform-scaling", "--config", "r1.csv", "--out", "r2.csv"], d);
    assert!(o.status.success());
    let r1 = fs::read_to_string(d.join("r1.csv")).unwrap();
    let r2 = fs::read_to_string(d.join("r2.csv")).unwrap();
    let body = |s: &str| s.lines().filter(|l| !l.starts_with("# config")).collect::<Vec<_>>().join("\n");
    assert_eq!(body(&r1), body(&r2));
    assert!(r1.contains("# seed: 9"));
    assert!(r1.lines().any(|l| l == "h,samples,mean,std_err,ratio,bound"));

    let o = flatchain(&["norm-estimate", "--target", "S1", "--d", "-1", "--levels", "3"], d);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("# verdict: pass"));

    let o = flatchain(&["fubini-check", "--dim", "2", "--h-list", "0.3", "--samples", "100", "--f", "ramp", "--out", "fub.csv"], d);
    assert_eq!(stdout_json(&o)["pass"], true);
    let o = flatchain(&["stability", "--config", "fub.csv"], d);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn field_experiments_run_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("spec.json"), VORTEX_SPEC).unwrap();
    let o = flatchain(
        &["generate", "vortex", "--spec", "spec.json", "--spacing", "0.003125", "--out", "f.fld", "--truth", "t.json"],
        d,
    );
    assert!(o.status.success());
    let r = stdout_json(&flatchain(
        &["sgrid-consistency", "--field", "f.fld", "--truth", "t.json", "--h-list", "0.1,0.05", "--samples", "10", "--out", "c.csv"],
        d,
    ));
    assert_eq!(r["summary"]["exact"], true);
    let r = stdout_json(&flatchain(
        &["energy-bound", "--field", "f.fld", "--truth", "t.json", "--h", "0.1", "--samples", "3", "--out", "e.csv"],
        d,
    ));
    assert!(r["summary"]["max_ratio"].as_f64().unwrap() > 0.0);
    let r = stdout_json(&flatchain(
        &["stability", "--field", "f.fld", "--h", "0.1", "--y", "0.25,0.02", "--epsilons", "0,0.0001,0.001", "--out", "s.csv"],
        d,
    ));
    assert_eq!(r["summary"]["threshold"], 0.001);
}
