use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_margin-maxer"))
        .args(args)
        .current_dir(dir)
        .env("RUST_BACKTRACE", "0")
        .output()
        .expect("binary runs")
}

fn ok_json(dir: &Path, args: &[&str]) -> Value {
    let out = bin(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON document")
}

fn stderr_of(dir: &Path, args: &[&str]) -> String {
    let out = bin(dir, args);
    assert!(!out.status.success(), "{args:?} should fail");
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn gen_writes_toy_dataset() {
    let dir = TempDir::new().unwrap();
    let doc = ok_json(dir.path(), &["gen", "--family", "toy", "--gamma", "0.5"]);
    assert_eq!(doc["gamma_star"], 0.5);
    assert_eq!(doc["config"]["dataset"]["family"], "toy");
    let csv = fs::read_to_string(dir.path().join("dataset.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "x0,x1,y");
    assert_eq!(lines.len(), 4);
}

#[test]
fn gen_is_deterministic_and_seeded() {
    let dir = TempDir::new().unwrap();
    let read = |name: &str| fs::read(dir.path().join(name)).unwrap();
    for (name, seed) in [("a.csv", "3"), ("b.csv", "3"), ("c.csv", "4")] {
        ok_json(
            dir.path(),
            &["gen", "--family", "ball-cap", "--seed", seed, "--out", name],
        );
    }
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_ne!(read("a.csv"), read("c.csv"));
}

#[test]
fn gen_rejects_gamma_outside_unit_interval() {
    let dir = TempDir::new().unwrap();
    let err = stderr_of(dir.path(), &["gen", "--family", "sphere-cap", "--gamma", "1.5"]);
    assert!(err.contains("gamma"), "{err}");
}

#[test]
fn solve_toy_by_dual() {
    let dir = TempDir::new().unwrap();
    let doc = ok_json(dir.path(), &["solve", "--family", "toy", "--method", "dual"]);
    let g = doc["solution"]["gamma_star"].as_f64().unwrap();
    assert!((g - 0.5).abs() < 1e-10, "{g}");
    assert_eq!(doc["data_rank"], 2);
}

#[test]
fn exact_solver_needs_a_spec() {
    let dir = TempDir::new().unwrap();
    ok_json(dir.path(), &["gen", "--family", "toy"]);
    let err = stderr_of(dir.path(), &["solve", "--data", "dataset.csv", "--method", "exact"]);
    assert!(err.contains("unsupported"), "{err}");
}

#[test]
fn antipodal_pair_has_unit_margin() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "pair.csv", "x0,x1,y\n0.6,0.8,1\n-0.6,-0.8,-1\n");
    let doc = ok_json(dir.path(), &["solve", "--data", "pair.csv"]);
    let sol = &doc["solution"];
    assert!((sol["gamma_star"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    let w: Vec<f64> = serde_json::from_value(sol["w_star"].clone()).unwrap();
    assert!((w[0] - 0.6).abs() < 1e-8 && (w[1] - 0.8).abs() < 1e-8, "{w:?}");
}

#[test]
fn rows_outside_the_unit_ball_need_rescale() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "big.csv", "x0,x1,y\n2,0,1\n-1,0,-1\n");
    stderr_of(dir.path(), &["solve", "--data", "big.csv"]);
    // every row is divided by the largest norm, 2
    let doc = ok_json(dir.path(), &["solve", "--data", "big.csv", "--rescale"]);
    assert!((doc["solution"]["gamma_star"].as_f64().unwrap() - 0.5).abs() < 1e-10);
}

#[test]
fn run_writes_trajectory_and_summary() {
    let dir = TempDir::new().unwrap();
    let doc = ok_json(
        dir.path(),
        &[
            "run", "--family", "sphere-cap", "--budget", "500", "--stop-gap", "1e-6", "--out",
            "tr.csv",
        ],
    );
    assert_eq!(doc["config"]["algorithm"], "prgd");
    assert_eq!(doc["config"]["reference"], "exact");
    assert_eq!(doc["reached"], true);
    assert_eq!(doc["acceleration_start"], 1000);
    let accel = doc["acceleration_iterations_to_stop"].as_u64().unwrap();
    assert_eq!(doc["iterations_to_stop"].as_u64().unwrap(), accel + 1000);
    assert!(doc["final_gap"].as_f64().unwrap() <= 1e-6);
    assert_eq!(doc["fits"].as_array().unwrap().len(), 3);

    let saved: Value =
        serde_json::from_slice(&fs::read(dir.path().join("tr.summary.json")).unwrap()).unwrap();
    assert_eq!(saved, doc);
    let csv = fs::read_to_string(dir.path().join("tr.csv")).unwrap();
    assert_eq!(csv.lines().count(), doc["final_time"].as_u64().unwrap() as usize + 2);
}

#[test]
fn resolved_config_reruns_identically() {
    let dir = TempDir::new().unwrap();
    let first = ok_json(
        dir.path(),
        &["run", "--family", "toy", "--algorithm", "ngd", "--budget", "300", "--out", "a.csv"],
    );
    let mut cfg = first["config"].clone();
    cfg["out_path"] = "b.csv".into();
    write(dir.path(), "cfg.json", &cfg.to_string());
    let second = ok_json(dir.path(), &["run", "--config", "cfg.json"]);
    assert_eq!(second["config"], cfg);
    assert_eq!(
        fs::read(dir.path().join("a.csv")).unwrap(),
        fs::read(dir.path().join("b.csv")).unwrap()
    );
}

#[test]
fn invalid_run_options_name_the_field() {
    let dir = TempDir::new().unwrap();
    let err = stderr_of(dir.path(), &["run", "--family", "toy", "--eta", "0"]);
    assert!(err.contains("eta"), "{err}");
    let err = stderr_of(dir.path(), &["run", "--family", "toy", "--warmup-steps", "0"]);
    assert!(err.contains("warmup"), "{err}");
}

const NGD_TOY: &str = r#"{"dataset": {"family": "toy", "gamma_star": 0.5, "n": 3},
    "algorithm": "ngd", "budget": 200, "log_stride": 3}"#;
const GD_TOY: &str = r#"{"dataset": {"family": "toy", "gamma_star": 0.5, "n": 3},
    "algorithm": "gd", "budget": 100, "log_stride": 2}"#;

#[test]
fn compare_merges_runs_by_iteration() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "ngd.json", NGD_TOY);
    write(dir.path(), "gd.json", GD_TOY);
    let doc = ok_json(dir.path(), &["compare", "ngd.json", "gd.json", "gd.json"]);
    assert_eq!(doc["columns"], serde_json::json!(["ngd", "gd", "gd_2"]));
    let csv = fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,ngd,gd,gd_2");
    let row = |t: &str| lines.iter().find(|l| l.split(',').next() == Some(t)).unwrap();
    let cells: Vec<&str> = row("3").split(',').collect();
    assert!(!cells[1].is_empty() && cells[2].is_empty());
    let cells: Vec<&str> = row("4").split(',').collect();
    assert!(cells[1].is_empty() && cells[2] == cells[3]);
}

#[test]
fn compare_single_config() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "ngd.json", NGD_TOY);
    let doc = ok_json(dir.path(), &["compare", "ngd.json", "--out", "one.csv"]);
    assert_eq!(doc["summaries"].as_array().unwrap().len(), 1);
    let csv = fs::read_to_string(dir.path().join("one.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,ngd"));
}

#[test]
fn compare_rejects_mismatched_datasets() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "ngd.json", NGD_TOY);
    write(dir.path(), "other.json", &NGD_TOY.replace("0.5", "0.4"));
    let err = stderr_of(dir.path(), &["compare", "ngd.json", "other.json"]);
    assert!(err.contains("mismatch"), "{err}");
}

#[test]
fn field_grid_on_toy() {
    let dir = TempDir::new().unwrap();
    let doc = ok_json(
        dir.path(),
        &["field", "--family", "toy", "--resolution", "5", "4", "--bounds", "0", "4", "-1", "2"],
    );
    assert_eq!(doc["points"], 20);
    let band: Vec<f64> = serde_json::from_value(doc["attractor_band"].clone()).unwrap();
    let s = (0.75f64).sqrt();
    assert!((band[0] - std::f64::consts::LN_2 / (4.0 * s)).abs() < 1e-15);
    let csv = fs::read_to_string(dir.path().join("field.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "w1,w2,dir1,dir2,phi");
    assert_eq!(lines.len(), 21);
    for line in &lines[1..] {
        let v: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert!(((v[2] * v[2] + v[3] * v[3]).sqrt() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn field_needs_two_dimensions() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "d3.csv", "x0,x1,x2,y\n0.5,0.1,0.1,1\n-0.5,0.2,0.0,-1\n");
    let err = stderr_of(dir.path(), &["field", "--data", "d3.csv"]);
    assert!(err.contains("dimension"), "{err}");
}

#[test]
fn fit_recovers_ngd_power_law() {
    let dir = TempDir::new().unwrap();
    ok_json(
        dir.path(),
        &["run", "--family", "toy", "--algorithm", "ngd", "--budget", "2000"],
    );
    let doc = ok_json(
        dir.path(),
        &["fit", "--trajectory", "trajectory.csv", "--window", "100", "2000"],
    );
    let fits = doc["fits"].as_array().unwrap();
    assert_eq!(fits.len(), 3);
    let power = fits.iter().find(|f| f["family"] == "power-law").unwrap();
    let slope = power["slope"].as_f64().unwrap();
    assert!((slope + 1.0).abs() < 0.05, "{slope}");
    assert!(power["r2"].as_f64().unwrap() > 0.98);
}

#[test]
fn fit_reports_short_windows_per_family() {
    let dir = TempDir::new().unwrap();
    ok_json(dir.path(), &["run", "--family", "toy", "--algorithm", "gd", "--budget", "50"]);
    let doc = ok_json(
        dir.path(),
        &["fit", "--trajectory", "trajectory.csv", "--window", "10", "15"],
    );
    for f in doc["fits"].as_array().unwrap() {
        assert!(f["error"].is_string(), "{f}");
    }
}
