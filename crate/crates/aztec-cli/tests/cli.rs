use std::path::Path;
use std::process::Command;
use std::time::Instant;

use aztec_cli::run_in;
use aztec_cli::verify::replay;

fn run(base: &Path, args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_in(std::iter::once("aztec").chain(args.iter().copied()), base, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn unknown_flag_exits_with_usage_error() {
    let status = Command::new(env!("CARGO_BIN_EXE_aztec")).args(["sample", "--bogus"]).output().unwrap();
    assert_eq!(status.status.code(), Some(2));
    assert!(!status.stderr.is_empty());
}

#[test]
fn bad_weight_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(dir.path(), &["sample", "--n", "4", "--a=-1", "--out", "t.json"]);
    assert_eq!(code, 1, "{err}");
}

#[test]
fn replay_reports_mismatches_and_changed_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path();
    let (code, _, err) = run(base, &["sample", "--n", "12", "--a", "0.5", "--seed", "3", "--out", "t.json"]);
    assert_eq!(code, 0, "{err}");
    let manifest = base.join("t.json.manifest.json");
    assert!(replay(&manifest).unwrap().mismatches.is_empty());

    // Same manifest replayed through the CLI.
    let (code, out, _) = run(base, &["verify", "--manifest", "t.json.manifest.json"]);
    assert_eq!(code, 0);
    assert!(out.contains("identical"), "{out}");

    // A manifest whose recorded hash disagrees with the regenerated bytes is reported.
    let text = std::fs::read_to_string(&manifest).unwrap();
    let mut m: serde_json::Value = serde_json::from_str(&text).unwrap();
    m["outputs"][0]["sha256"] = serde_json::Value::String("0".repeat(64));
    std::fs::write(&manifest, serde_json::to_string_pretty(&m).unwrap()).unwrap();
    assert_eq!(replay(&manifest).unwrap().mismatches.len(), 1);
    let (code, out, _) = run(base, &["verify", "--manifest", "t.json.manifest.json"]);
    assert_eq!(code, 1, "{out}");

    // A changed input file is refused outright.
    let (code, _, err) = run(base, &["render", "t.json", "--out", "t.svg"]);
    assert_eq!(code, 0, "{err}");
    std::fs::write(base.join("t.json"), b"{}").unwrap();
    assert!(replay(&base.join("t.svg.manifest.json")).is_err());
}

#[test]
fn kernel_routes_agree() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = run(dir.path(), &["kernel", "--n", "8", "--a", "0.5", "--method", "both"]);
    assert_eq!(code, 0, "{err}");
    let line = out.lines().find(|l| l.starts_with("max abs diff")).expect("summary line");
    let diff: f64 = line.split_whitespace().last().unwrap().parse().unwrap();
    assert!(diff < 1e-10, "{line}");
}

#[test]
fn quick_verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let t0 = Instant::now();
    let (code, out, err) = run(dir.path(), &["verify", "--quick"]);
    assert_eq!(code, 0, "{out}\n{err}");
    assert!(t0.elapsed().as_secs() < 60);
    assert_eq!(out.lines().filter(|l| l.starts_with('[')).count(), 12, "{out}");
}
