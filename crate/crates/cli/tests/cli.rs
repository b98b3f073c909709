use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_superloc"))
}

fn bundled(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn superloc(args: &[&str], scenario: &Path) -> Output {
    bin().args(args).arg("--scenario").arg(scenario).output().unwrap()
}

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn compare_passes_and_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = superloc(&["compare", "--json", out.to_str().unwrap()], &bundled("sphere_dh.json"));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["status"], "pass");
    assert_eq!(v["command"], "compare");
    assert_eq!(v["totals"]["fail"], 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("localized_vs_oracle"));
}

#[test]
fn quiet_prints_nothing_on_success() {
    let o = superloc(&["brst-check", "--quiet"], &bundled("kahler_c2.json"));
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
}

#[test]
fn reports_are_identical_modulo_timing() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("r{k}.json"));
        let o = superloc(&["compare", "--quiet", "--json", out.to_str().unwrap()], &bundled("sphere_dh.json"));
        assert_eq!(o.status.code(), Some(0));
        let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert!(v.as_object_mut().unwrap().remove("timing").is_some());
        reports.push(serde_json::to_string(&v).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn threads_env_is_honored_and_validated() {
    let ok = bin().env("SUPERLOC_THREADS", "1").args(["oracle", "--quiet", "--scenario"]).arg(bundled("flat_rotation.json")).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let bad = bin().env("SUPERLOC_THREADS", "zero").args(["oracle", "--scenario"]).arg(bundled("flat_rotation.json")).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn schema_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(superloc(&["compare"], &dir.path().join("missing.json")).status.code(), Some(2));
    let broken = write(&dir, "broken.json", r#"{"name": "x", "patches": [{"name": "p"}]}"#);
    let o = superloc(&["localize"], &broken);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("schema error"));
    assert_eq!(bin().args(["nonsense", "--scenario", "x"]).output().unwrap().status.code(), Some(2));
    assert_eq!(superloc(&["compare", "--tol", "-1"], &bundled("sphere_dh.json")).status.code(), Some(2));
}

#[test]
fn computation_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        &dir,
        "degenerate.json",
        r#"{"name": "degenerate",
            "oracle": [{"even": ["x", "y"], "lower": [-1, 0], "upper": [1, 1],
                        "metric": [["1", "0"], ["0", "x"]], "sigma": [["2", "0"], ["0", "1"]],
                        "integrand": "th1*th2"}]}"#,
    );
    let o = superloc(&["oracle"], &p);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("positive definite"));
}

#[test]
fn failed_checks_exit_one() {
    // an expected value off by a factor two
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(bundled("flat_rotation.json")).unwrap()).unwrap();
    v["expected"] = "4*pi/t".into();
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "wrong.json", &v.to_string());
    let o = superloc(&["localize"], &p);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL  localized_vs_expected"));
}

#[test]
fn empty_check_list_and_odd_dimension_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(bundled("sphere_dh.json")).unwrap()).unwrap();
    v["checks"] = serde_json::json!([]);
    let p = write(&dir, "empty.json", &v.to_string());
    let o = superloc(&["compare"], &p);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("0 pass, 0 fail, 0 skipped"));

    let odd = write(
        &dir,
        "odd.json",
        r#"{"name": "odd", "params": {"t": "1"},
            "patches": [{"name": "p", "even": ["x", "y"], "odd": ["th1"],
                         "action": [["y", "-x"]], "fiber": [[["0"]]], "xi": ["t"],
                         "q": {"kind": "explicit", "even": ["th1", "0"], "odd": ["0"]},
                         "integrand": "1", "fixed_points": {"strategy": "linear"}}]}"#,
    );
    let o = superloc(&["localize"], &odd);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("skip  super_localize[p]"));
}

#[test]
fn tol_override_can_fail_a_comparison() {
    // the localized and quadrature values differ by ~5e-16 relative
    let o = superloc(&["compare", "--tol", "1e-30"], &bundled("sphere_dh.json"));
    assert_eq!(o.status.code(), Some(1));
}
