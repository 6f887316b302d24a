//! Frame-by-frame stereo odometry on the simulated house with each feature
//! mode, scored against ground truth.

use std::time::Instant;

use plslam::evaluation::{ate, rpe_rmse, Trajectory, DEFAULT_RPE_DELTA};
use plslam::odometry::{run_odometry, OdometryConfig};
use plslam::simulator::{FeatureMode, SimConfig, Simulation};

fn main() -> plslam::Result<()> {
    let points = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(200);
    let cfg = SimConfig {
        n_points: points,
        seed: 7,
        ..SimConfig::default()
    };
    let sim = Simulation::run(&cfg)?;
    let times: Vec<f64> = sim.frames.iter().map(|f| f.timestamp).collect();
    let gt = Trajectory::from_world_to_camera(&times, &sim.poses)?;
    println!("{} frames, {} points, {} lines, 1 px noise", sim.frames.len(), sim.scene.points.len(), sim.scene.lines.len());

    for mode in FeatureMode::ALL {
        let start = Instant::now();
        let r = run_odometry(&sim.frames, &cfg.intrinsics, sim.poses[0], mode, &OdometryConfig::default())?;
        let est = Trajectory::from_world_to_camera(&times, &r.poses)?;
        let (t, rot) = rpe_rmse(&est, &gt, DEFAULT_RPE_DELTA)?;
        println!(
            "{:<13} RPE {t:.4} m / {rot:.5} rad, ATE {:.4} m, {} solver iterations, {:.2?}",
            mode.to_string(),
            ate(&est, &gt, true)?,
            r.iterations,
            start.elapsed()
        );
    }
    Ok(())
}
