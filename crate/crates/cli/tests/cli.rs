use std::path::Path;
use std::process::{Command, Output};

fn gfvrefine(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gfvrefine")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field(text: &str, key: &str) -> f64 {
    let mut words = text.split_whitespace();
    words.find(|w| *w == key).unwrap();
    words.next().unwrap().trim_end_matches([',', ')']).parse().unwrap()
}

fn synth(dir: &Path, format: &str) {
    let o = gfvrefine(&[
        "synth", "--family", "multi-sphere", "--count", "2", "--points", "128", "--format", format, "--seed", "3",
        "--out", dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn evaluate_identical_clouds() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "xyz");
    let a = dir.path().join("multi-sphere-0000.xyz");
    let o = gfvrefine(&["evaluate", "--pred", a.to_str().unwrap(), "--gt", a.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(field(&text, "cd_l2"), 0.0);
    assert_eq!(field(&text, "fscore"), 1.0);
}

#[test]
fn evaluate_chamfer_is_symmetric() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "pcf");
    let a = dir.path().join("multi-sphere-0000.pcf");
    let b = dir.path().join("multi-sphere-0001.pcf");
    let run = |p: &Path, g: &Path| {
        let o = gfvrefine(&["evaluate", "--pred", p.to_str().unwrap(), "--gt", g.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
        assert!(o.status.success());
        field(&stdout(&o), "cd_l2")
    };
    let (ab, ba) = (run(&a, &b), run(&b, &a));
    assert!(ab > 0.0);
    assert!((ab - ba).abs() <= 1e-12 * ab);
}

#[test]
fn crop_writes_floor_count() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "xyz");
    let input = dir.path().join("multi-sphere-0000.xyz");
    let output = dir.path().join("partial.xyz");
    let o = gfvrefine(&[
        "crop", "--input", input.to_str().unwrap(), "--mode", "spherical", "--ratio", "0.25", "--output",
        output.to_str().unwrap(), "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lines = std::fs::read_to_string(&output).unwrap().lines().filter(|l| !l.trim().is_empty()).count();
    assert_eq!(lines, 96);
}

#[test]
fn bad_invocations_fail() {
    assert!(!gfvrefine(&["evaluate", "--bogus"]).status.success());
    assert!(!gfvrefine(&["no-such-command"]).status.success());
    let o = gfvrefine(&["evaluate", "--pred", "/nonexistent.xyz", "--gt", "/nonexistent.xyz"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("error:"));
}

#[test]
fn params_reports_both_networks() {
    let o = gfvrefine(&["params"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("actor") && text.contains("critic"));
}
