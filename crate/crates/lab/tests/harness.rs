use std::collections::BTreeMap;

use ma_lab::report::load_reports;
use ma_lab::spec::parse_overrides;
use ma_lab::{run_experiment, run_suite, ExperimentId, ExperimentSpec, LabError, SuiteConfig};
use serde_json::{json, Value};

fn problem(n: usize, rhs: Value, hole: bool, r_out: f64) -> Value {
    let a: Vec<f64> = (0..n * n).map(|k| if k / n == k % n { 1.0 } else { 0.0 }).collect();
    let mut p = json!({
        "n": n, "rhs": rhs, "phi": {"expr": "0"},
        "far_field": {"A": a, "b": vec![0.0; n]}, "R_out": r_out,
    });
    if hole {
        p["domain"] = json!({"kind": "ball", "center": vec![0.0; n], "radius": 1.0});
    }
    p
}

fn spec(v: Value) -> ExperimentSpec {
    serde_json::from_value(v).unwrap()
}

fn sharpness(n: usize) -> ExperimentSpec {
    spec(json!({"id": "E-SHARP", "problem": problem(n, json!({"kind": "sharpness"}), false, 4.0)}))
}

fn fa(rhs: Value, beta: Option<f64>) -> ExperimentSpec {
    let mut v = json!({"id": "E-FA", "problem": problem(3, rhs, false, 4.0)});
    if let Some(b) = beta {
        v["claimed_beta"] = json!(b);
    }
    spec(v)
}

fn existence(h: f64) -> ExperimentSpec {
    spec(json!({
        "id": "E-T5",
        "problem": problem(3, json!({"kind": "constant", "params": {"value": 1.0}}), true, 4.0),
        "solver": {"h": [h], "width": 2},
    }))
}

fn close(a: &Value, b: &Value, tol: f64) -> bool {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs()))
        }
        (Value::Array(x), Value::Array(y)) => x.len() == y.len() && x.iter().zip(y).all(|(p, q)| close(p, q, tol)),
        (Value::Object(x), Value::Object(y)) => {
            x.len() == y.len() && x.iter().all(|(k, v)| y.get(k).is_some_and(|w| close(v, w, tol)))
        }
        _ => a == b,
    }
}

#[test]
fn empty_suite_passes_with_an_empty_report() {
    let report = run_suite(&SuiteConfig::default(), 2, None).unwrap();
    assert!(report.reports.is_empty());
    assert_eq!(report.exit_code(), 0);
}

#[test]
fn one_forced_failure_fails_the_suite() {
    let suite = SuiteConfig {
        experiments: vec![
            sharpness(2),
            fa(json!({"kind": "radial_perturbation", "params": {"exponent": 4.0}}), None),
            fa(json!({"kind": "sharpness"}), Some(3.0)),
        ],
        workers: None,
    };
    let dir = tempfile::tempdir().unwrap();
    let report = run_suite(&suite, 2, Some(dir.path())).unwrap();
    assert_eq!((report.passed, report.failed), (2, 1));
    assert_eq!(report.exit_code(), 1);
    let failed: Vec<&str> = report.reports.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    assert_eq!(failed, ["E-FA_2"]);
    let stored = load_reports(dir.path()).unwrap();
    assert_eq!(stored.len(), 3);
    assert!(stored.iter().all(|r| r.rederive() == r.passed));
    assert!(dir.path().join("suite.csv").exists());
}

#[test]
fn sharpness_source_fails_the_decay_ladder_with_unit_growth() {
    let r = run_experiment(&fa(json!({"kind": "sharpness"}), Some(3.0)), None);
    assert!(!r.passed);
    let growth = r.payload["fa"]["growth_exponents"][0].as_f64().unwrap();
    assert!((growth - 1.0).abs() < 1e-3, "{growth}");
}

#[test]
fn identical_configs_reproduce_payloads() {
    let s = existence(0.25);
    let a = run_experiment(&s, None);
    let b = run_experiment(&s, None);
    assert!(a.passed, "{}", a.summary());
    assert_eq!(a.provenance.config_hash, b.provenance.config_hash);
    let (pa, pb) = (serde_json::to_value(&a.payload).unwrap(), serde_json::to_value(&b.payload).unwrap());
    assert!(close(&pa, &pb, 1e-12));
    assert_eq!(a.criteria, b.criteria);
}

#[test]
fn module_errors_become_failed_reports() {
    let mut s = existence(0.25);
    s.solver.max_newton = 0;
    s.solver.max_sweeps = 1;
    let r = run_experiment(&s, None);
    assert!(!r.passed);
    assert!(r.error[0].contains("did not converge"), "{:?}", r.error);
}

#[test]
fn preconditions_are_config_errors() {
    let bump = json!({"kind": "compact_bump", "params": {"width": 2.0, "center": [0.0, 0.0, 0.0]}});
    let wrong_dim = spec(json!({"id": "E-T1-2D", "problem": problem(3, bump, false, 16.0)}));
    assert!(matches!(wrong_dim.validate(), Err(LabError::Config(_))));
    let bump2 = json!({"kind": "compact_bump", "params": {"width": 2.0}});
    let one_radius = spec(json!({"id": "E-T3", "problem": problem(2, bump2, false, 8.0), "radii": [8.0]}));
    assert!(matches!(one_radius.validate(), Err(LabError::Config(_))));
    let r = run_experiment(&one_radius, None);
    assert!(!r.passed && r.error[0].contains("radius ladder"));
    let not_sharp = spec(json!({"id": "E-SHARP", "problem": problem(2, json!({"kind": "constant"}), false, 4.0)}));
    assert!(not_sharp.validate().is_err());
}

#[test]
fn threshold_overrides_change_verdicts() {
    let mut s = sharpness(3);
    assert!(run_experiment(&s, None).passed);
    s.thresholds.apply(&parse_overrides("growth_band=1e-4").unwrap()).unwrap();
    let r = run_experiment(&s, None);
    assert!(!r.passed);
    assert_eq!(r.criterion("leading_coefficient").unwrap().tolerance, 1e-4);
    let mut bad = BTreeMap::new();
    bad.insert("no_such_band".to_string(), 1.0);
    assert!(s.thresholds.apply(&bad).is_err());
    assert!(parse_overrides("grid_band").is_err());
}

#[test]
fn ids_round_trip_through_json() {
    for id in ExperimentId::ALL {
        let text = serde_json::to_string(&id).unwrap();
        assert_eq!(text, format!("\"{id}\""));
        assert_eq!(serde_json::from_str::<ExperimentId>(&text).unwrap(), id);
    }
}

#[test]
fn bundled_configs_validate() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let suite = SuiteConfig::load(&root.join("default_suite.json")).unwrap();
    let ids: std::collections::BTreeSet<_> = suite.experiments.iter().map(|s| s.id).collect();
    assert_eq!(ids.len(), ExperimentId::ALL.len());
    for s in &suite.experiments {
        s.validate().unwrap();
    }
    ExperimentSpec::load(&root.join("existence.json")).unwrap().validate().unwrap();
}
