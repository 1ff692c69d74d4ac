//! End-to-end tests of the `sgsim` binary: exit codes, artifact contracts,
//! and determinism.

use std::path::Path;
use std::process::{Command, Output};

fn sgsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgsim"))
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn summary(dir: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join("summary.json")).expect("summary.json exists");
    serde_json::from_str(&text).expect("summary parses")
}

/// A small, fast parameter set for plumbing tests.
fn small_args<'a>(out: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut args = vec![
        "--A", "0.5", "--S", "2", "--z0", "3", "--n-basis", "24", "--grid-points", "128",
        "--dt", "0.002", "--out", out,
    ];
    args.extend_from_slice(extra);
    args
}

#[test]
fn compare_reports_ordered_overlap_deficits() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let output = sgsim(&[
        "--A", "0.5", "--S", "4", "--z0", "4", "--kind", "compare",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let s = summary(&out);
    let d = &s["results"]["overlap_deficits"];
    assert_eq!(d["ordered"], serde_json::Value::Bool(true));
    let (ad, ps, cs, sy) = (
        d["adiabatic"].as_f64().unwrap(),
        d["pseudo_adiabatic"].as_f64().unwrap(),
        d["coherent_state"].as_f64().unwrap(),
        d["symmetrized"].as_f64().unwrap(),
    );
    assert!(ad > ps && ps > cs && cs > sy, "{ad} > {ps} > {cs} > {sy}");
}

#[test]
fn textbook_mode_evolve_reports_zero_flip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out_str = out.to_str().unwrap().to_owned();
    let output = sgsim(&small_args(
        &out_str,
        &["--kind", "evolve", "--textbook-mode", "true", "--drift", "false"],
    ));
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let s = summary(&out);
    assert!(s["results"]["flip_up_to_down"].as_f64().unwrap() < 1e-10);
    assert!(s["results"]["flip_down_to_up"].as_f64().unwrap() < 1e-10);
}

#[test]
fn tomography_round_trips_synthetic_polarisation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out_str = out.to_str().unwrap().to_owned();
    let output = sgsim(&small_args(
        &out_str,
        &["--kind", "tomography", "--synthetic-p", "0.3,-0.4,0.5"],
    ));
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let s = summary(&out);
    let p = s["results"]["tomography"]["polarization"].as_array().unwrap();
    for (fitted, injected) in p.iter().zip([0.3, -0.4, 0.5]) {
        assert!((fitted.as_f64().unwrap() - injected).abs() < 1e-8);
    }
    assert_eq!(s["results"]["tomography"]["scale"], serde_json::json!(1.0));
}

#[test]
fn tomography_reads_observed_map_back() {
    // Produce a map with one run, then feed p0.csv back as the observed
    // pattern of an unpolarised beam: the fit must return p = 0.
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("first");
    let out_str = out.to_str().unwrap().to_owned();
    let output = sgsim(&small_args(&out_str, &["--kind", "asymmetry"]));
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));

    let observed = out.join("p0.csv");
    let out2 = dir.path().join("second");
    let out2_str = out2.to_str().unwrap().to_owned();
    let output = sgsim(&small_args(
        &out2_str,
        &["--kind", "tomography", "--observed", observed.to_str().unwrap()],
    ));
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let s = summary(&out2);
    for component in s["results"]["tomography"]["polarization"].as_array().unwrap() {
        assert!(component.as_f64().unwrap().abs() < 1e-6);
    }
}

#[test]
fn identical_configs_produce_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let (out1, out2) = (dir.path().join("one"), dir.path().join("two"));
    for out in [&out1, &out2] {
        let out_str = out.to_str().unwrap().to_owned();
        let output = sgsim(&small_args(&out_str, &["--kind", "asymmetry"]));
        assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    }
    for name in ["p0.csv", "ax.csv", "ay.csv", "az.csv", "flip_density.csv"] {
        let a = std::fs::read(out1.join(name)).unwrap();
        let b = std::fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    let (mut s1, mut s2) = (summary(&out1), summary(&out2));
    // Wall time and the output path are the only legitimate differences.
    for s in [&mut s1, &mut s2] {
        s.as_object_mut().unwrap().remove("wall_time_s");
        s["config"].as_object_mut().unwrap().remove("out");
    }
    assert_eq!(s1, s2);
}

#[test]
fn csv_maps_match_declared_grid_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out_str = out.to_str().unwrap().to_owned();
    let output = sgsim(&small_args(&out_str, &["--kind", "evolve"]));
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let s = summary(&out);
    let points = s["grid"]["points"].as_u64().unwrap() as usize;
    let extent = s["grid"]["extent"].as_f64().unwrap();
    let spacing = s["grid"]["spacing"].as_f64().unwrap();

    let text = std::fs::read_to_string(out.join("p0.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,z,value"));
    let mut xs: Vec<f64> = Vec::new();
    let mut rows = 0usize;
    for line in lines {
        let x: f64 = line.split(',').next().unwrap().parse().unwrap();
        xs.push(x);
        rows += 1;
    }
    assert_eq!(rows, points * points);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    assert_eq!(xs.len(), points);
    assert!((xs[0] + extent).abs() < 1e-12);
    assert!((xs[1] - xs[0] - spacing).abs() < 1e-12);
}

#[test]
fn empty_config_fails_naming_required_keys() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("empty.json");
    std::fs::write(&config, "{}").unwrap();
    let output = sgsim(&["--config", config.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    let err: serde_json::Value = serde_json::from_str(stderr.trim()).expect("error is JSON");
    assert_eq!(err["error"]["kind"], "validation");
    let msg = err["error"]["message"].as_str().unwrap();
    assert!(msg.contains('A') && msg.contains('S') && msg.contains("z0"), "{msg}");
}

#[test]
fn flags_override_config_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{"A":0.5,"S":2,"z0":3,"kind":"evolve","n_basis":24,"grid_points":128,
            "dt":0.002,"drift":false,"m0":"up"}"#,
    )
    .unwrap();
    let out = dir.path().join("run");
    let output = sgsim(&[
        "--config", config.to_str().unwrap(),
        "--m0", "down",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let s = summary(&out);
    assert_eq!(s["config"]["m0"], "down");
    assert_eq!(s["config"]["A"], 0.5);
    // A single down run reports only the down->up flip.
    assert!(s["results"]["flip_down_to_up"].is_f64());
    assert!(s["results"]["flip_up_to_down"].is_null());
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"A":0.5,"S":2,"z0":3,"grid":"huge"}"#).unwrap();
    let output = sgsim(&["--config", config.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("grid"));
}

#[test]
fn sweep_writes_per_point_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    // Two points with AS held fixed; basis and step resolve per point.
    std::fs::write(
        &config,
        r#"{"A":0.5,"S":2,"z0":4,"kind":"sweep",
            "sweep":{"axis":"A","values":[0.5,1.0],"hold":"AS"}}"#,
    )
    .unwrap();
    let out = dir.path().join("run");
    let output = sgsim(&[
        "--config", config.to_str().unwrap(),
        "--out", out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let s = summary(&out);
    let points = s["results"]["sweep"].as_array().unwrap();
    assert_eq!(points.len(), 2);
    assert_eq!(points[0]["A"], 0.5);
    assert_eq!(points[0]["S"], 2.0);
    assert_eq!(points[1]["A"], 1.0);
    assert_eq!(points[1]["S"], 1.0);

    let table = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(
        lines.next(),
        Some("A,S,n_basis,dt,adiabatic,pseudo_adiabatic,coherent_state,symmetrized")
    );
    assert_eq!(lines.count(), 2);
}

#[test]
fn diverging_integration_is_a_numerical_error() {
    // A half-traversal step is far beyond the RK4 stability limit for the
    // reference frequencies; the norm monitor must abort with exit code 3.
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let output = sgsim(&[
        "--A", "0.5", "--S", "4", "--z0", "4", "--kind", "evolve", "--dt", "0.5",
        "--drift", "false", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(3), "{}", String::from_utf8_lossy(&output.stderr));
    let stderr = String::from_utf8_lossy(&output.stderr);
    let err: serde_json::Value = serde_json::from_str(stderr.trim()).expect("error is JSON");
    assert_eq!(err["error"]["kind"], "numerical");
}

#[test]
fn drift_with_undeflected_beam_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let output = sgsim(&[
        "--A", "0.5", "--S", "0", "--z0", "3", "--kind", "evolve", "--drift", "true",
        "--n-basis", "16", "--grid-points", "64", "--dt", "0.002",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2), "{}", String::from_utf8_lossy(&output.stderr));
    assert!(String::from_utf8_lossy(&output.stderr).contains("drift"));
}
