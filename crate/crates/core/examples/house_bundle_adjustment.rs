//! Full bundle adjustment of the noise-free house: every pose but the first is
//! perturbed, landmarks are triangulated from the perturbed poses, and the
//! solver recovers the ground truth.

use std::time::Instant;

use plslam::evaluation::{ate, Trajectory};
use plslam::optimizer::{solve_lm, SolveOptions};
use plslam::simulator::{build_graph_from_sim, FeatureMode, InitMode, SimConfig, Simulation};

fn main() -> plslam::Result<()> {
    let cfg = SimConfig {
        noise_sigma: 0.0,
        ..SimConfig::default()
    };
    let sim = Simulation::run(&cfg)?;
    let init = InitMode::Perturbed {
        pose_sigma: 0.05,
        seed: 1,
    };
    let mut graph = build_graph_from_sim(&sim, init, FeatureMode::PointsAndLines)?;
    println!(
        "{} poses, {} points, {} lines, {} edges",
        graph.poses.len(),
        graph.points.len(),
        graph.lines.len(),
        graph.edge_count()
    );

    let start = Instant::now();
    let report = solve_lm(&mut graph, &SolveOptions::default())?;
    println!(
        "{} iterations ({}), cost {:.3e} -> {:.3e} in {:.2?}",
        report.iterations,
        report.termination,
        report.initial_cost,
        report.final_cost,
        start.elapsed()
    );

    let times: Vec<f64> = sim.frames.iter().map(|f| f.timestamp).collect();
    let poses: Vec<_> = graph.poses.values().map(|v| v.pose).collect();
    let est = Trajectory::from_world_to_camera(&times, &poses)?;
    let gt = Trajectory::from_world_to_camera(&times, &sim.poses)?;
    println!("ATE {:.3e} m", ate(&est, &gt, false)?);
    Ok(())
}
