use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SHORT_RUN: &[&str] = &["--set", "sim.t_max=2", "--set", "sim.sample_stride=1"];

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sim")).args(args).output().expect("binary runs")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all = args.to_vec();
    all.extend(["--out", dir.to_str().unwrap()]);
    sim(&all)
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn trajectory_is_byte_identical_across_runs() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let mut args = vec!["trajectory"];
    args.extend(SHORT_RUN);
    assert!(run_in(a.path(), &args).status.success());
    assert!(run_in(b.path(), &args).status.success());
    let x = fs::read(a.path().join("trajectory.csv")).unwrap();
    assert_eq!(x, fs::read(b.path().join("trajectory.csv")).unwrap());
    let header = String::from_utf8(x).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "t,kx,ky,kz,purity,q_expectation,norm_error");
}

#[test]
fn manifest_config_reproduces_the_run() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let mut args = vec!["trajectory", "--set", "geometry.n1.theta=\"0.3pi\""];
    args.extend(SHORT_RUN);
    let out = run_in(a.path(), &args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(a.path());
    assert_eq!(m["config"]["experiment"], "trajectory");
    assert!((m["config"]["geometry"]["n1"]["theta"].as_f64().unwrap() - 0.3 * std::f64::consts::PI).abs() < 1e-15);
    assert!(m["started_at"].is_string() && m["duration_seconds"].as_f64().unwrap() >= 0.0);
    assert!(m["summary"]["final_t"].as_f64().unwrap() == 2.0);

    let cfg = b.path().join("echo.json");
    fs::write(&cfg, serde_json::to_string(&m["config"]).unwrap()).unwrap();
    assert!(run_in(b.path(), &["trajectory", "--config", cfg.to_str().unwrap()]).status.success());
    assert_eq!(
        fs::read(a.path().join("trajectory.csv")).unwrap(),
        fs::read(b.path().join("trajectory.csv")).unwrap()
    );
    let mut echoed = manifest(b.path())["config"].clone();
    echoed["output"]["path"] = m["config"]["output"]["path"].clone();
    assert_eq!(echoed, m["config"]);
}

#[test]
fn reals_round_trip_through_csv() {
    let d = TempDir::new().unwrap();
    let mut args = vec!["trajectory"];
    args.extend(SHORT_RUN);
    assert!(run_in(d.path(), &args).status.success());
    for row in csv_rows(&d.path().join("trajectory.csv")) {
        for cell in row {
            let x: f64 = cell.parse().unwrap();
            assert_eq!(format!("{x:.16e}"), cell);
        }
    }
}

#[test]
fn zero_duration_gives_single_row() {
    let d = TempDir::new().unwrap();
    assert!(run_in(d.path(), &["trajectory", "--set", "sim.t_max=0"]).status.success());
    let rows = csv_rows(&d.path().join("trajectory.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn small_basin_grid() {
    let d = TempDir::new().unwrap();
    let out = run_in(d.path(), &["basins", "--set", "basins.n_theta=2", "--set", "basins.n_phi=2", "--threads", "1"]);
    assert!(out.status.success());
    let rows = csv_rows(&d.path().join("basins.csv"));
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| ["-1", "0", "1"].contains(&r[2].as_str())));
    let s = &manifest(d.path())["summary"];
    assert_eq!(s["points"], 4);
    assert_eq!(s["sign_mismatches_off_boundary"], 0);
}

#[test]
fn noise_curve_json_output() {
    let d = TempDir::new().unwrap();
    let out = run_in(d.path(), &["noise-curve", "--set", "noise.theta_grid_size=7", "--set", "output.format=\"json\""]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&fs::read_to_string(d.path().join("noise.json")).unwrap()).unwrap();
    assert_eq!(v["columns"], serde_json::json!(["theta1", "p_plus", "born", "step"]));
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 7);
    assert!((rows[3][1].as_f64().unwrap() - 0.5).abs() < 1e-9);
    assert!(manifest(d.path())["summary"]["max_complementarity_residual"].as_f64().unwrap() < 1e-6);
}

#[test]
fn schmidt_flow_output() {
    let d = TempDir::new().unwrap();
    let out = run_in(d.path(), &["schmidt-flow", "--set", "schmidt_flow.m=3", "--set", "schmidt_flow.checkpoints=4"]);
    assert!(out.status.success());
    let rows = csv_rows(&d.path().join("flow.csv"));
    assert_eq!(rows[0].len(), 1 + 3 + 2);
    let s = &manifest(d.path())["summary"];
    assert!(s["cross_check_max_deviation"].as_f64().unwrap() < 1e-6);
    assert_eq!(s["attractor"], 0);
}

#[test]
fn invalid_configuration_exits_with_one() {
    let d = TempDir::new().unwrap();
    for bad in [
        vec!["trajectory", "--set", "spins.two_s2=5001"],
        vec!["trajectory", "--set", "nonsense.key=1"],
        vec!["trajectory", "--set", "rates.gamma=-1"],
        vec!["trajectory", "--set", "geometry.n1.theta=\"abcpi\""],
        vec!["noise-curve", "--set", "noise.phi0=0"],
        vec!["trajectory", "--threads", "0"],
    ] {
        let out = run_in(d.path(), &bad);
        assert_eq!(out.status.code(), Some(1), "{bad:?}");
    }
    let missing = run_in(d.path(), &["trajectory", "--config", "/nonexistent/config.json"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn unwritable_output_exits_with_two() {
    let d = TempDir::new().unwrap();
    let file = d.path().join("plain");
    fs::write(&file, "x").unwrap();
    let out = run_in(&file.join("sub"), &["trajectory", "--set", "sim.t_max=0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn angle_strings_match_radians() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let mut x = vec!["trajectory", "--set", "geometry.n1.theta=\"0.55pi\""];
    x.extend(SHORT_RUN);
    let theta = format!("geometry.n1.theta={:e}", 0.55 * std::f64::consts::PI);
    let mut y = vec!["trajectory", "--set", theta.as_str()];
    y.extend(SHORT_RUN);
    assert!(run_in(a.path(), &x).status.success());
    assert!(run_in(b.path(), &y).status.success());
    assert_eq!(
        fs::read(a.path().join("trajectory.csv")).unwrap(),
        fs::read(b.path().join("trajectory.csv")).unwrap()
    );
}

#[cfg(feature = "inject-apply-q-sign-flip")]
#[test]
fn broken_nonlinear_term_fails_validation() {
    let d = TempDir::new().unwrap();
    let out = run_in(d.path(), &["validate"]);
    assert_eq!(out.status.code(), Some(3));
}
