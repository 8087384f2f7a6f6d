use std::process::{Command, Output};

fn ealab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ealab")).args(args).output().unwrap()
}

#[test]
fn passing_example_exits_zero_with_report() {
    let out = ealab(&["run", "--example", "sl3-loop", "--suites", "form,eala", "--window", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], true);
    assert_eq!(v["suites"]["eala"]["data"]["nullity"], 1);
    assert!(v.get("timing_seconds").is_none());
}

#[test]
fn stdout_report_is_deterministic() {
    let args = ["run", "--example", "affine-a2-twisted", "--suites", "ears,centroid", "--window", "2"];
    assert_eq!(ealab(&args).stdout, ealab(&args).stdout);
}

#[test]
fn unknown_example_is_malformed() {
    let out = ealab(&["run", "--example", "nope", "--suites", "form"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
}

#[test]
fn unknown_suite_is_malformed() {
    let out = ealab(&["run", "--example", "sl3-split", "--suites", "form,bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_spec_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("spec.json");
    std::fs::write(&p, r#"{"L": {"sl-torus": {"size": 3, "torus": {"laurent": {"n": "two"}}}}}"#).unwrap();
    let out = ealab(&["run", "--spec", p.to_str().unwrap(), "--suites", "form"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("L.sl-torus.torus.laurent.n"), "{err}");
}

#[test]
fn spec_file_runs() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("spec.json");
    std::fs::write(&p, r#"{"L": {"twisted-loop": {"size": 3, "aut": "neg-transpose"}}}"#).unwrap();
    let out = ealab(&["run", "--spec", p.to_str().unwrap(), "--suites", "ears", "--window", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn zero_window_is_malformed() {
    let out = ealab(&["run", "--example", "sl3-split", "--suites", "form", "--window", "0"]);
    assert_eq!(out.status.code(), Some(2));
}
