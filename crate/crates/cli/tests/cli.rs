use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn revspec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_revspec")).args(args).env_remove("REVSPEC_THREADS").output().expect("binary runs")
}

fn profiles() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../profiles")
}

fn profile(name: &str) -> String {
    profiles().join(name).to_str().unwrap().to_string()
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn round_spectrum_has_only_the_great_circles() {
    let out = revspec(&["spectrum", &profile("round.json"), "--pq-max", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json_of(&out);
    let entries = doc["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 7);
    for e in entries {
        let lengths = e["lengths"].as_array().unwrap();
        if (e["p"].as_u64(), e["q"].as_u64()) == (Some(1), Some(1)) {
            assert_eq!(lengths.len(), 1);
            assert!((lengths[0].as_f64().unwrap() - TAU).abs() < 1e-12);
        } else {
            assert!(lengths.is_empty(), "{e}");
        }
    }
    assert!((doc["equator_length"].as_f64().unwrap() - TAU).abs() < 1e-12);
    assert!((doc["meridian_length"].as_f64().unwrap() - TAU).abs() < 1e-12);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let out = revspec(&["spectrum", "two_harmonic", "--pq-max", "4", "--grid", "64", "--out", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(!ta.is_empty());
    assert_eq!(ta, tb);
    let doc: Value = serde_json::from_slice(&ta).unwrap();
    assert_eq!(doc["overrides"], serde_json::json!(["grid", "pq-max"]));
}

#[test]
fn bimodal_profile_fails_validation() {
    let out = revspec(&["validate", &profile("bad_bimodal.json")]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json_of(&out)["error"]["name"], "NonUnimodal");
}

#[test]
fn round_and_zoll_are_isospectral() {
    let out = revspec(&["isospectral", &profile("round.json"), &profile("zoll_eps05.json")]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json_of(&out);
    assert_eq!(doc["isospectral"], true);
    assert!(doc["superlevel_residual"].as_f64().unwrap() < 1e-8);

    let out = revspec(&["isospectral", "round", "two_harmonic"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn family_members_round_trip_and_stay_isospectral() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("member.json");
    let p = path.to_str().unwrap();
    let out = revspec(&["family", "two_harmonic", "--f", "eps*u*(u^2-1)", "--eps", "0.5", "--out", p]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(revspec(&["validate", p]).status.code(), Some(0));
    assert_eq!(revspec(&["isospectral", "two_harmonic", p]).status.code(), Some(0));

    // The rearrangement embeds its source config: it must reproduce the file.
    let rearranged = revspec(&["rearrange", p]);
    assert_eq!(rearranged.status.code(), Some(0));
    let member: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(json_of(&rearranged)["params"]["source"], member);

    let out = revspec(&["family", "round", "--f", "eps*u*(u^2-1)", "--eps", "-0.5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json_of(&out)["kind"], "cord_deformed");
}

#[test]
fn constraint_violations_are_named() {
    let out = revspec(&["family", "round", "--f", "0.5*u"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ConstraintViolation"));
}

#[test]
fn usage_errors_exit_with_two_and_print_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"kind": "ellipsoid", "m": 1}"#).unwrap();
    for args in [
        vec!["validate", "no_such_profile.json"],
        vec!["validate", bad.to_str().unwrap()],
        vec!["spectrum", "round", "--grid", "8"],
        vec!["return-map", "round", "--tol", "-1"],
        vec!["tangent-demo", "--function", "sine"],
        vec!["family", "round", "--f", "a*u"],
        vec!["return-map", "round", "--tau-cap", "-3"],
    ] {
        let out = revspec(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("A profile is a JSON file"), "{args:?}");
    }
    assert_eq!(revspec(&["spectrum"]).status.code(), Some(2));
    assert_eq!(revspec(&["frobnicate"]).status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_revspec")).args(["validate", "round"]).env("REVSPEC_THREADS", "zero").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn return_map_writes_the_documented_columns() {
    let out = revspec(&["return-map", "two_harmonic", "--beta-grid", "16", "--tol", "1e-9"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("# overrides=[\"beta-grid\", \"tol\"]"));
    let mut rows = text.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(rows.next(), Some("beta,eta,tau_ode,theta_ode"));
    let data: Vec<Vec<f64>> = rows.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(data.len(), 16);
    for row in &data {
        assert!((row[1] - row[0].cos()).abs() < 1e-15);
        assert!(row[2] > 0.0);
    }
}

#[test]
fn tangent_demo_recovers_a_convex_function() {
    let out = revspec(&["tangent-demo", "--function", "exp", "--n", "64", "--out", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json_of(&out);
    assert!(doc["max_error"].as_f64().unwrap() < 1e-5);
    assert_eq!(doc["line_count"], 64);
}

#[test]
fn abel_check_passes_on_a_deformed_profile() {
    let out = revspec(&["abel-check", "two_harmonic_deformed", "--beta-grid", "16"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let doc = json_of(&out);
    assert!(doc["max_relative_tau_residual"].as_f64().unwrap() < 1e-6);
}

#[test]
fn conjugacy_holds_for_an_isospectral_pair() {
    let out = revspec(&["conjugacy-test", "two_harmonic", "two_harmonic_deformed", "--samples", "3", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let doc = json_of(&out);
    assert!(doc["max_distance"].as_f64().unwrap() < 1e-5);
    assert_eq!(doc["overrides"], serde_json::json!(["samples", "seed"]));
}

#[test]
fn unstable_demo_shows_growth_and_contrast() {
    let out = revspec(&["unstable-demo", "--k-max", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let doc = json_of(&out);
    let steps = doc["sequence"]["steps"].as_array().unwrap();
    assert_eq!(steps.len(), 3);
    let d: Vec<f64> = steps.iter().map(|s| s["discrepancy"].as_f64().unwrap()).collect();
    assert!(d[0] < d[1] && d[1] < d[2]);
}
