use std::path::Path;
use std::process::{Command, Output};

fn mm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mm")).args(args).env("MM_THREADS", "2").output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn verify_writes_a_passing_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", "# defaults\n");
    let out = dir.path().join("report.csv");
    let o = mm(&["verify", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("suite,case,resolution,measured,reference,error,tolerance,order,pass"));
    assert!(lines.all(|l| l.starts_with("verify,") && l.ends_with(",PASS")));
}

#[test]
fn stdout_report_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", "members = 10\n");
    let a = mm(&["laws", "--config", &cfg, "--seed", "42"]);
    let b = mm(&["laws", "--config", &cfg, "--seed", "42"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = mm(&["laws", "--config", &cfg, "--seed", "43"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn json_format() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", "format = json\n");
    let o = mm(&["verify", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    let rows = mm_core::report::from_json(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert!(rows.iter().all(|r| r.suite == "verify"));
    // the flag overrides the file
    let o = mm(&["verify", "--config", &cfg, "--format", "csv"]);
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("suite,case"));
}

#[test]
fn malformed_config_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.cfg", "suite = verify\nthis line has no separator\n");
    let out = dir.path().join("report.csv");
    let o = mm(&["verify", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    assert!(!out.exists());
    let o = mm(&["verify", "--config", dir.path().join("absent.cfg").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_suite_settings_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "torus.cfg", "shape = torus(2, 0.5)\n");
    let out = dir.path().join("report.csv");
    let o = mm(&["evolve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn failed_criteria_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "strict.cfg", "tol_rotor = 0\ntol_radial = 0\n");
    let out = dir.path().join("report.csv");
    let o = mm(&["verify", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL verify/"));
    assert!(std::fs::read_to_string(&out).unwrap().contains(",FAIL"));
}

#[test]
fn usage_errors() {
    let o = mm(&["verify"]);
    assert_ne!(o.status.code(), Some(0));
    let o = mm(&["bogus", "--config", "x"]);
    assert_ne!(o.status.code(), Some(0));
}
