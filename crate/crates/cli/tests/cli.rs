use std::fs;
use std::path::{Path, PathBuf};

use miquel_cli::format::{from_json, to_json, CliffordJson, PatchJson, PatternJson, Point};
use miquel_cli::{run_command, CommandResult, EXIT_DEGENERATE, EXIT_FAILED_CHECK, EXIT_OK, EXIT_USAGE};
use miquel_core::ExtendedComplex;
use proptest::prelude::*;
use serde_json::Value;

fn run(args: &[&str]) -> CommandResult {
    run_command(std::iter::once("miquel").chain(args.iter().copied()))
}

fn path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let out = path(dir, name);
    let mut args = vec!["gen-pattern", "--out", s(&out)];
    args.extend_from_slice(extra);
    let r = run(&args);
    assert_eq!(r.exit_code, EXIT_OK, "{}", r.report);
    out
}

fn load(p: &Path) -> PatternJson {
    from_json(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn generated_pattern_validates() {
    let dir = tempfile::tempdir().unwrap();
    let p = gen(dir.path(), "p.json", &["--size", "4x4", "--seed", "7", "--kasteleyn"]);
    let r = run(&["validate", s(&p)]);
    assert_eq!(r.exit_code, EXIT_OK, "{}", r.report);
    let r = run(&["star-ratios", s(&p), "--json"]);
    let v: Value = serde_json::from_str(&r.report).unwrap();
    assert_eq!(v["kasteleyn"], Value::Bool(true));
    assert_eq!(v["faces"].as_array().unwrap().len(), 16);
}

#[test]
fn miquel_move_twice_restores_the_pattern() {
    let dir = tempfile::tempdir().unwrap();
    let p = gen(dir.path(), "p.json", &["--size", "4x4", "--seed", "7", "--kasteleyn"]);
    let q = path(dir.path(), "q.json");
    let q2 = path(dir.path(), "q2.json");
    assert_eq!(run(&["miquel-move", s(&p), "--face", "5", "--out", s(&q)]).exit_code, EXIT_OK);
    assert_eq!(run(&["validate", s(&q)]).exit_code, EXIT_OK);
    assert_eq!(run(&["miquel-move", s(&q), "--face", "5", "--out", s(&q2)]).exit_code, EXIT_OK);
    let (a, b) = (load(&p).to_pattern().unwrap(), load(&q2).to_pattern().unwrap());
    assert_eq!(a.graph(), b.graph());
    for (v, z) in &a.vertex_points {
        assert!(z.approx_eq(&b.vertex_points[v], 1e-7));
    }
    for (f, z) in &a.centers.points {
        assert!(z.approx_eq(&b.centers.points[f], 1e-7));
    }
}

#[test]
fn urban_renewal_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let p = gen(dir.path(), "p.json", &["--size", "4x4", "--seed", "7", "--kasteleyn"]);
    let r = run(&["check-urban-renewal", s(&p), "--face", "5", "--json"]);
    assert_eq!(r.exit_code, EXIT_OK, "{}", r.report);
    let v: Value = serde_json::from_str(&r.report).unwrap();
    assert!(v["max_discrepancy"].as_f64().unwrap() <= 1e-9);
    let total: f64 = v["classes"].as_array().unwrap().iter().map(|c| c["before"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() <= 1e-12);
}

#[test]
fn clifford_move_matches_the_mutation_map() {
    let dir = tempfile::tempdir().unwrap();
    let p = gen(dir.path(), "p.json", &["--size", "4x4", "--seed", "3", "--kasteleyn"]);
    let c = path(dir.path(), "c.json");
    let r = run(&["clifford-move", s(&p), "--face", "6", "--out", s(&c), "--json"]);
    assert_eq!(r.exit_code, EXIT_OK, "{}", r.report);
    let moved = load(&c);
    assert!(moved.vertices.is_empty());
    let r = run(&["star-ratios", s(&c)]);
    assert_eq!(r.exit_code, EXIT_OK, "{}", r.report);
}

#[test]
fn regular_svg_counts() {
    let dir = tempfile::tempdir().unwrap();
    let p = gen(dir.path(), "r.json", &["--size", "4x4", "--regular"]);
    let svg = path(dir.path(), "r.svg");
    assert_eq!(run(&["export-svg", s(&p), "--out", s(&svg)]).exit_code, EXIT_OK);
    let text = fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches(r#"class="circle""#).count(), 16);
    assert_eq!(text.matches(r#"class="edge""#).count(), 32);
    // Unit squares: every circle has radius sqrt(2)/2.
    assert_eq!(text.matches(r#"r="0.707107""#).count(), 16);

    let layered = path(dir.path(), "d.svg");
    let r = run(&["export-svg", s(&p), "--out", s(&layered), "--layers", "centers,dual"]);
    assert_eq!(r.exit_code, EXIT_OK);
    let text = fs::read_to_string(&layered).unwrap();
    assert_eq!(text.matches(r#"class="center""#).count(), 16);
    assert_eq!(text.matches(r#"class="dual""#).count(), 32);
    assert!(!text.contains(r#"class="circle""#));
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "a.json", &["--size", "4x4", "--seed", "11", "--kasteleyn"]);
    let b = gen(dir.path(), "b.json", &["--size", "4x4", "--seed", "11", "--kasteleyn"]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let (sa, sb) = (path(dir.path(), "a.svg"), path(dir.path(), "b.svg"));
    run(&["export-svg", s(&a), "--out", s(&sa), "--layers", "circles,centers,edges,dual"]);
    run(&["export-svg", s(&a), "--out", s(&sb), "--layers", "circles,centers,edges,dual"]);
    assert_eq!(fs::read(&sa).unwrap(), fs::read(&sb).unwrap());
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = gen(dir.path(), "p.json", &["--size", "4x6", "--seed", "2", "--patch"]);
    let text = fs::read_to_string(&p).unwrap();
    assert_eq!(to_json(&load(&p)), text);
    let pattern = load(&p).to_pattern().unwrap();
    assert_eq!(to_json(&PatternJson::from(&pattern)), text);

    let out = path(dir.path(), "dyn");
    let patch = path(dir.path(), "patch.json");
    let r = run(&["dynamics", "--steps", "3", "--seed", "5", "--size", "4x4", "--out", s(&out), "--patch", s(&patch)]);
    assert_eq!(r.exit_code, EXIT_OK, "{}", r.report);
    let text = fs::read_to_string(&patch).unwrap();
    let parsed: PatchJson = from_json(&text).unwrap();
    assert_eq!(to_json(&PatchJson::from(&parsed.to_patch().unwrap())), text);

    let cfg = path(dir.path(), "cfg.json");
    assert_eq!(run(&["clifford-config", "--seed", "4", "--out", s(&cfg)]).exit_code, EXIT_OK);
    let text = fs::read_to_string(&cfg).unwrap();
    let parsed: CliffordJson = from_json(&text).unwrap();
    assert_eq!(to_json(&parsed), text);
    assert_eq!(parsed.points.len(), 8);
    assert_eq!(parsed.circles.len(), 8);
}

#[test]
fn dynamics_writes_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "dyn");
    let r = run(&["dynamics", "--steps", "2", "--seed", "1", "--out", s(&out), "--json"]);
    assert_eq!(r.exit_code, EXIT_OK, "{}", r.report);
    let trace: Vec<String> = serde_json::from_str(&fs::read_to_string(out.join("trace.json")).unwrap()).unwrap();
    assert_eq!(trace, ["step_0000.json", "step_0001.json", "step_0002.json"]);
    for name in &trace {
        assert_eq!(run(&["validate", s(&out.join(name))]).exit_code, EXIT_OK);
    }
    let v: Value = serde_json::from_str(&r.report).unwrap();
    assert!(v["lattice_deviation"].as_array().unwrap().iter().all(|d| d.as_f64().unwrap() <= 1e-8));

    // A regular start stays put.
    let reg = gen(dir.path(), "r.json", &["--size", "4x4", "--regular"]);
    let out = path(dir.path(), "reg");
    let r = run(&["dynamics", "--steps", "2", "--input", s(&reg), "--out", s(&out)]);
    assert_eq!(r.exit_code, EXIT_OK, "{}", r.report);
    let (a, b) = (load(&reg), load(&out.join("step_0002.json")));
    assert_eq!(a, b);
}

#[test]
fn clifford_config_from_circles() {
    let r = run(&[
        "clifford-config",
        "--base",
        "0,0",
        "--circle",
        "1,0,1",
        "--circle",
        "0.2,1.1,1.118033988749895",
        "--circle",
        "-1,0.3,1.044030650891055",
        "--circle",
        "0.3,-1.4,1.431782106327635",
        "--json",
    ]);
    assert_eq!(r.exit_code, EXIT_OK, "{}", r.report);
    let v: Value = serde_json::from_str(&r.report).unwrap();
    assert_eq!(v["passed"], Value::Bool(true));
    assert_eq!(v["configuration"]["points"]["0"], serde_json::json!([0.0, 0.0]));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["--help"]).exit_code, EXIT_OK);
    assert_eq!(run(&["frobnicate"]).exit_code, EXIT_USAGE);
    assert_eq!(run(&["gen-pattern", "--size", "3x4", "--out", "x.json"]).exit_code, EXIT_USAGE);
    assert_eq!(run(&["validate", s(&path(dir.path(), "missing.json"))]).exit_code, EXIT_USAGE);
    let p = gen(dir.path(), "p.json", &["--size", "4x4", "--seed", "7", "--kasteleyn"]);
    assert_eq!(
        run(&["miquel-move", s(&p), "--face", "99", "--out", s(&path(dir.path(), "z.json"))]).exit_code,
        EXIT_USAGE
    );

    // Identical circles have no second intersections.
    let r = run(&[
        "clifford-config",
        "--base",
        "0,0",
        "--circle",
        "1,0,1",
        "--circle",
        "1,0,1",
        "--circle",
        "1,0,1",
        "--circle",
        "1,0,1",
    ]);
    assert_eq!(r.exit_code, EXIT_DEGENERATE, "{}", r.report);

    // A displaced vertex breaks concyclicity.
    let mut broken = load(&p);
    broken.vertices.get_mut(&0).unwrap().0 = ExtendedComplex::new(0.3, -0.2);
    let bad = path(dir.path(), "bad.json");
    fs::write(&bad, to_json(&broken)).unwrap();
    let r = run(&["validate", s(&bad)]);
    assert_eq!(r.exit_code, EXIT_FAILED_CHECK, "{}", r.report);
    assert!(r.report.contains("invalid"));
    let r = run(&["export-svg", s(&bad), "--out", s(&path(dir.path(), "bad.svg"))]);
    assert_eq!(r.exit_code, EXIT_FAILED_CHECK);
    assert!(!path(dir.path(), "bad.svg").exists());
}

proptest! {
    #[test]
    fn points_round_trip_exactly(re in proptest::num::f64::NORMAL | proptest::num::f64::ZERO, im in proptest::num::f64::NORMAL) {
        let p = Point(ExtendedComplex::new(re, im));
        let back: Point = from_json(&serde_json::to_string(&p).unwrap()).unwrap();
        prop_assert_eq!(back, p);
        let inf: Point = from_json(&serde_json::to_string(&Point(ExtendedComplex::Infinity)).unwrap()).unwrap();
        prop_assert_eq!(inf, Point(ExtendedComplex::Infinity));
    }
}
