use std::path::PathBuf;

use superloc::harness::{run, run_brst_check, run_compare, run_localize, run_oracle, Command, HarnessError, Scenario, Status};

fn scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    Scenario::load(&path).unwrap()
}

fn assert_all_pass(sc: &Scenario, cmd: Command) {
    let r = run(sc, cmd).unwrap();
    assert_eq!(r.status, Status::Pass, "{}", r.summary());
    assert_eq!(r.exit_code(), 0);
    assert!(!r.records.is_empty());
}

#[test]
fn sphere_dh_compare() {
    let r = run_compare(&scenario("sphere_dh.json")).unwrap();
    assert_eq!(r.status, Status::Pass, "{}", r.summary());
    let exact = 2.0 * std::f64::consts::PI * (1f64.exp() - (-1f64).exp());
    assert!((r.values["oracle"] - exact).abs() / exact < 1e-10);
    assert!((r.values["localized"] - exact).abs() / exact < 1e-6);
    // one fixed point per stereographic patch
    assert_eq!(r.contributions.len(), 2);
    for name in ["super_localize[north]", "classical_localize[south]", "global_berezin", "localized_vs_oracle"] {
        assert_eq!(r.record(name).unwrap().status, Status::Pass);
    }
}

#[test]
fn bundled_scenarios_pass() {
    assert_all_pass(&scenario("sphere_dh.json"), Command::BrstCheck);
    assert_all_pass(&scenario("flat_rotation.json"), Command::Compare);
    assert_all_pass(&scenario("flat_rotation.json"), Command::BrstCheck);
    assert_all_pass(&scenario("kahler_c2.json"), Command::BrstCheck);
    assert_all_pass(&scenario("adhm_k1_n2.json"), Command::BrstCheck);
    assert_all_pass(&scenario("adhm_k2_n2_brst.json"), Command::BrstCheck);
}

#[test]
fn commands_select_sections() {
    let sc = scenario("flat_rotation.json");
    let loc = run_localize(&sc).unwrap();
    assert!(loc.record("global_berezin").is_none());
    assert!(loc.record("super_localize[plane]").is_some());
    let orc = run_oracle(&sc).unwrap();
    assert!(orc.record("super_localize[plane]").is_none());
    assert_eq!(orc.record("super_stokes[annulus]").unwrap().status, Status::Pass);
    let brst = run_brst_check(&sc).unwrap();
    assert!(brst.records.iter().all(|r| r.name.starts_with("brst[") || r.name.starts_with("sigma_parallel[")));
}

#[test]
fn empty_check_list_gives_empty_report() {
    let mut sc = scenario("sphere_dh.json");
    sc.checks = Some(vec![]);
    let r = run_compare(&sc).unwrap();
    assert!(r.records.is_empty());
    assert_eq!(r.exit_code(), 0);
}

#[test]
fn check_filter_keeps_each_requested_check_once() {
    let mut sc = scenario("flat_rotation.json");
    sc.checks = Some(vec!["super_stokes".into(), "global_berezin".into(), "adhm.square_full".into()]);
    let r = run_oracle(&sc).unwrap();
    let names: Vec<&str> = r.records.iter().map(|r| r.name.as_str()).collect();
    assert_eq!(names, ["global_berezin", "super_stokes[box]", "super_stokes[annulus]", "adhm.square_full"]);
    assert_eq!(r.record("adhm.square_full").unwrap().status, Status::Skipped);
    assert_eq!(r.exit_code(), 0);
}

#[test]
fn odd_fiber_dimension_is_skipped() {
    let text = r#"{
        "name": "odd",
        "params": {"t": "1"},
        "patches": [{
            "name": "p", "even": ["x", "y"], "odd": ["th1"],
            "action": [["y", "-x"]], "fiber": [[["0"]]], "xi": ["t"],
            "q": {"kind": "explicit", "even": ["th1", "0"], "odd": ["0"]},
            "integrand": "1", "fixed_points": {"strategy": "linear"}
        }]
    }"#;
    let r = run_localize(&Scenario::from_json(text).unwrap()).unwrap();
    let rec = r.record("super_localize[p]").unwrap();
    assert_eq!(rec.status, Status::Skipped);
    assert!(rec.reason.as_deref().unwrap().contains("odd dimension 1"));
    assert_eq!(r.exit_code(), 0);
    assert!(!r.values.contains_key("localized"));
}

#[test]
fn failed_check_gives_exit_one() {
    let mut sc = scenario("flat_rotation.json");
    // the counter-clockwise rotation breaks Q-closedness of the Gaussian integrand
    sc.patches[0].model.action = vec![vec!["-y".into(), "x".into()]];
    let r = run_compare(&sc).unwrap();
    assert_eq!(r.record("super_localize[plane]").unwrap().status, Status::Fail);
    assert_eq!(r.record("localized_vs_oracle").unwrap().status, Status::Skipped);
    assert_eq!(r.exit_code(), 1);
}

#[test]
fn schema_errors() {
    let cases = [
        "{",
        r#"{"name": "x", "bogus": 1}"#,
        r#"{"name": "x", "patches": [{"name": "p", "even": ["x"], "action": [["x", "y"]], "xi": ["t"]}]}"#,
        r#"{"name": "x", "expected": "2*("}"#,
        r#"{"name": "x", "patches": [{"name": "p", "even": ["x", "y"], "action": [["y", "-x"]], "xi": ["t"], "integrand": "1"}]}"#,
        r#"{"name": "x", "oracle": [{"even": ["x"], "lower": [0], "upper": [1, 2], "integrand": "th1"}]}"#,
    ];
    for text in cases {
        let err = Scenario::from_json(text).unwrap_err();
        assert!(matches!(err, HarnessError::Schema(_)), "{text}");
        assert_eq!(err.exit_code(), 2);
    }
}

#[test]
fn degenerate_oracle_metric_is_a_computation_error() {
    let text = r#"{
        "name": "degenerate",
        "oracle": [{"even": ["x", "y"], "lower": [-1, 0], "upper": [1, 1],
                    "metric": [["1", "0"], ["0", "x"]], "sigma": [["2", "0"], ["0", "1"]],
                    "integrand": "th1*th2"}]
    }"#;
    let err = run_oracle(&Scenario::from_json(text).unwrap()).unwrap_err();
    assert!(matches!(err, HarnessError::Computation(_)));
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn reports_are_deterministic_modulo_timing() {
    let sc = scenario("sphere_dh.json");
    let a = run_compare(&sc).unwrap();
    let b = run_compare(&sc).unwrap();
    assert_eq!(a.to_json_without_timing(), b.to_json_without_timing());
    assert_eq!(a.scenario_hash, b.scenario_hash);
    assert_eq!(a.scenario_hash.len(), 64);
    let mut other = sc.clone();
    other.params.insert("t".into(), superloc::scalar::Number::Rational(superloc::scalar::rational(2, 1)));
    assert_ne!(other.hash(), sc.hash());
}
