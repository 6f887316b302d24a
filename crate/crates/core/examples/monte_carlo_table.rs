//! Monte-Carlo comparison of point-only, line-only and combined stereo
//! odometry on the house scene, in an abundant-point and a sparse-point
//! regime.
//!
//! Usage: `cargo run --release --example monte_carlo_table -- [runs] [dense points] [sparse points]`

use std::time::Instant;

use plslam::montecarlo::{aggregate, run_monte_carlo, ExperimentConfig};
use plslam::simulator::FeatureMode;

fn main() -> plslam::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let runs = args.first().copied().unwrap_or(25);
    let regimes = [args.get(1).copied().unwrap_or(200), args.get(2).copied().unwrap_or(20)];

    for n_points in regimes {
        let mut cfg = ExperimentConfig {
            runs,
            ..ExperimentConfig::default()
        };
        cfg.sim.n_points = n_points;
        let start = Instant::now();
        let results = run_monte_carlo(&cfg)?;
        println!("\n{n_points} points, {runs} runs ({:.1?})", start.elapsed());
        println!("{:<14} {:>12} {:>10} {:>12} {:>10}", "features", "RPE trans m", "std", "RPE rot rad", "ATE m");
        for (mode, _, mt, st, mr, ma) in aggregate(&results, &FeatureMode::ALL) {
            println!("{:<14} {:>12.5} {:>10.5} {:>12.5} {:>10.4}", mode.to_string(), mt, st, mr, ma);
        }
        let wins = (0..runs)
            .filter(|r| {
                let get = |m| results.iter().find(|x| x.run == *r && x.mode == m).unwrap().rpe_trans;
                get(FeatureMode::Points) < get(FeatureMode::Lines)
            })
            .count();
        println!("point-only beats line-only in {wins}/{runs} runs");
    }
    Ok(())
}
