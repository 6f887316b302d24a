use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn plslam(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plslam"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("run plslam")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn simulate_writes_scene_observations_and_ground_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let o = plslam(&["simulate", "--frames", "5", "--points", "10", "--out-dir", "sim"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let gt = fs::read_to_string(tmp.path().join("sim/groundtruth.tum")).unwrap();
    assert_eq!(gt.lines().filter(|l| !l.starts_with('#')).count(), 5);
    let scene = fs::read_to_string(tmp.path().join("sim/scene.txt")).unwrap();
    assert_eq!(scene.lines().filter(|l| l.starts_with("LINE")).count(), 25);
    assert_eq!(scene.lines().filter(|l| l.starts_with("POINT")).count(), 10);
    assert!(tmp.path().join("sim/observations.txt").exists());
}

#[test]
fn solve_writes_trajectories_and_a_report_then_evaluate_and_export_use_them() {
    let tmp = tempfile::tempdir().unwrap();
    let o = plslam(
        &["solve", "--runs", "2", "--frames", "15", "--points", "40", "--feature-mode", "points", "--save-graph", "--out-dir", "out"],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(tmp.path().join("out/report.csv")).unwrap();
    let mut lines = report.lines();
    assert!(lines.next().unwrap().starts_with("run,seed,feature_mode,rpe_trans_m"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("0,0,points,") && rows[1].starts_with("1,1,points,"));
    assert!(rows[2].starts_with("mean,,points,") && rows[3].starts_with("std,,points,"));
    for r in 0..2 {
        assert!(tmp.path().join(format!("out/trajectory_points_run{r:03}.tum")).exists());
        assert!(tmp.path().join(format!("out/graph_points_run{r:03}.txt")).exists());
    }

    let sim = plslam(&["simulate", "--frames", "15", "--points", "40", "--out-dir", "sim"], tmp.path());
    assert_eq!(code(&sim), 0);
    let e = plslam(&["evaluate", "out/trajectory_points_run000.tum", "sim/groundtruth.tum"], tmp.path());
    assert_eq!(code(&e), 0);
    let text = String::from_utf8(e.stdout).unwrap();
    let fields: Vec<f64> = text.lines().nth(1).unwrap().split(',').skip(1).map(|f| f.parse().unwrap()).collect();
    assert!(fields.iter().all(|v| v.is_finite() && *v < 0.5), "{text}");

    let same = plslam(&["evaluate", "sim/groundtruth.tum", "sim/groundtruth.tum", "--no-align", "--out", "m.csv"], tmp.path());
    assert_eq!(code(&same), 0);
    let m = fs::read_to_string(tmp.path().join("m.csv")).unwrap();
    assert_eq!(m.lines().nth(1).unwrap(), "groundtruth.tum,0,0,0");
    let aligned = plslam(&["evaluate", "sim/groundtruth.tum", "sim/groundtruth.tum"], tmp.path());
    let text = String::from_utf8(aligned.stdout).unwrap();
    let ate: f64 = text.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!(ate < 1e-12);

    let x = plslam(&["export", "--graph", "out/graph_points_run000.txt", "--out-dir", "map", "--format", "ply"], tmp.path());
    assert_eq!(code(&x), 0, "{}", String::from_utf8_lossy(&x.stderr));
    let ply = fs::read_to_string(tmp.path().join("map/map.ply")).unwrap();
    assert!(ply.starts_with("ply\n") && ply.contains("element vertex 40"));
    let x = plslam(&["export", "--graph", "out/graph_points_run000.txt", "--out-dir", "map"], tmp.path());
    assert_eq!(code(&x), 0);
    assert_eq!(fs::read_to_string(tmp.path().join("map/map_points.csv")).unwrap().lines().count(), 41);

    let g = plslam(&["solve", "--graph", "out/graph_points_run000.txt", "--out-dir", "again"], tmp.path());
    assert_eq!(code(&g), 0, "{}", String::from_utf8_lossy(&g.stderr));
    assert!(tmp.path().join("again/solve_report.csv").exists());
}

#[test]
fn json_report_is_valid() {
    let tmp = tempfile::tempdir().unwrap();
    let o = plslam(
        &["solve", "--runs", "1", "--frames", "10", "--points", "30", "--init-mode", "ground-truth", "--format", "json", "--out-dir", "j"],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("j/report.json")).unwrap()).unwrap();
    assert_eq!(v["runs"].as_array().unwrap().len(), 3);
    assert_eq!(v["aggregate"].as_array().unwrap().len(), 3);
    assert_eq!(v["runs"][0]["feature_mode"], "points");
}

#[test]
fn check_jacobians_passes_and_zero_trials_warns() {
    let tmp = tempfile::tempdir().unwrap();
    let o = plslam(&["check-jacobians", "--trials", "100"], tmp.path());
    assert_eq!(code(&o), 0);
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.starts_with("block,max_relative_error,failures,trials"));
    assert!(out.trim_end().ends_with("PASS"));
    let z = plslam(&["check-jacobians", "--trials", "0"], tmp.path());
    assert_eq!(code(&z), 0);
    assert!(String::from_utf8(z.stderr).unwrap().contains("warning"));
    let strict = plslam(&["check-jacobians", "--trials", "20", "--tolerance", "1e-30"], tmp.path());
    assert_eq!(code(&strict), 4);
}

#[test]
fn error_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&plslam(&["solve", "--bogus"], tmp.path())), 2);
    assert_eq!(code(&plslam(&["frobnicate"], tmp.path())), 2);
    assert_eq!(code(&plslam(&["solve", "--runs", "0"], tmp.path())), 2);
    assert_eq!(code(&plslam(&["evaluate", "missing.tum", "also-missing.tum"], tmp.path())), 3);
    fs::write(tmp.path().join("bad.tum"), "0.0 1 2 3\n").unwrap();
    let o = plslam(&["evaluate", "bad.tum", "bad.tum"], tmp.path());
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8(o.stderr).unwrap().contains("bad.tum"));
    assert_eq!(code(&plslam(&["--help"], tmp.path())), 0);
}
