use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ckfdirac(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ckfdirac")).args(args).arg("--out").arg(out).env_remove("CKFDIRAC_OUT").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn manifest(out: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn classify_special() {
    let dir = tempfile::tempdir().unwrap();
    let o = ckfdirac(dir.path(), &["classify", "--ckf", r#"{"a":[0,0,0.5],"b0":0,"b":[0,0,0],"c":[0,0,1]}"#]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("kind = Special") && s.contains("nu = 0.5") && s.contains("admissible = true"), "{s}");
    let m = manifest(dir.path());
    assert_eq!(m["config"]["subcommand"], "classify");
    assert_eq!(m["status"], "pass");
    assert!(m["version"].is_string());
}

#[test]
fn umlaufsatz_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = ckfdirac(dir.path(), &["loop-integrals", "--ckf", "ro", "--seed-point", "1,0,0"]);
    assert_eq!(o.status.code(), Some(0));
    let mut r = csv::Reader::from_path(dir.path().join("loop-integrals.csv")).unwrap();
    let row = r.records().map(Result::unwrap).find(|r| &r[3] == "int_absY").unwrap();
    let v: f64 = row[4].parse().unwrap();
    assert!((v - 4.0 * std::f64::consts::PI).abs() < 1e-7);
}

#[test]
fn losyau_control() {
    let dir = tempfile::tempdir().unwrap();
    let o = ckfdirac(dir.path(), &["control-losyau", "--grid", "24,6"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(dir.path().join("control-losyau.csv")).unwrap();
    assert!(table.starts_with("quantity,value,threshold,pass"));
    assert!(table.lines().any(|l| l.starts_with("sigma_min,") && l.ends_with("true")));
}

#[test]
fn sweep_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = ckfdirac(dir.path(), &["spectrum-sweep", "--ckf", "ro", "--potential", "axial-bump", "--grid", "10,4", "--stencil", "2", "--ts", "0:2:1", "--threads", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("spectrum-sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,sigma_min,iters,converged");
    assert_eq!(lines.len(), 4);
    let m = manifest(dir.path());
    assert_eq!(m["config"]["threads"], 2);
    assert_eq!(m["config"]["stencil"], 2);
    assert!(m["notes"].as_array().unwrap().iter().any(|n| n.as_str().unwrap().contains("floor")));
}

#[test]
fn manifest_reruns_identically() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let o = ckfdirac(a.path(), &["holonomy", "--ckf", "cr:1", "--seed-point", "0.5,0,0.3", "--seed-point", "2,0,1", "--threads", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let cfg = a.path().join("manifest.json");
    let o = ckfdirac(b.path(), &["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    for f in ["holonomy.csv", "holonomy.jsonl"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"subcommand":"verify-identities","ckf":"ro","points":3,"seed":1}"#).unwrap();
    let o = ckfdirac(dir.path(), &["--config", cfg.to_str().unwrap(), "--points", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let m = manifest(dir.path());
    assert_eq!((m["config"]["points"].as_u64(), m["config"]["seed"].as_u64()), (Some(2), Some(1)));
}

#[test]
fn check_failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    // the uniform field has no closed orbits
    let o = ckfdirac(dir.path(), &["loop-integrals", "--ckf", "ud", "--t-max", "5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL"));
    assert_eq!(manifest(dir.path())["status"], "fail");
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["bogus"][..],
        &["classify"],
        &["classify", "--ckf", "cr:-1"],
        &["holonomy", "--ckf", "ro", "--seed-point", "1,0"],
        &["spectrum-sweep", "--ckf", "ro", "--stencil", "3"],
        &["spectrum-sweep", "--ckf", "ro", "--ts", "0:1"],
    ] {
        let o = ckfdirac(dir.path(), args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
    let o = ckfdirac(dir.path(), &["classify"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("RunConfig"));
}
