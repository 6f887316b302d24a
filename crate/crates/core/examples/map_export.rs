//! Solve a short noisy sequence, trim the lines to their observed extent and
//! write the map and trajectory as CSV and PLY.

use std::fs::File;
use std::io::BufWriter;

use plslam::export::{line_extent, write_lines_csv, write_map_ply, write_points_csv, write_trajectory_ply};
use plslam::optimizer::{solve_lm, SolveOptions};
use plslam::simulator::{build_graph_from_sim, FeatureMode, InitMode, SimConfig, Simulation};

fn main() -> plslam::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "map_export".into());
    std::fs::create_dir_all(&out)?;
    let mut cfg = SimConfig {
        n_points: 100,
        ..SimConfig::default()
    };
    cfg.trajectory.n_frames = 40;
    let sim = Simulation::run(&cfg)?;
    let init = InitMode::Perturbed {
        pose_sigma: 0.02,
        seed: 1,
    };
    let mut graph = build_graph_from_sim(&sim, init, FeatureMode::PointsAndLines)?;
    let report = solve_lm(&mut graph, &SolveOptions::default())?;
    println!("{} iterations, cost {:.1} -> {:.1}", report.iterations, report.initial_cost, report.final_cost);

    for l in sim.scene.lines.iter().take(5) {
        if let Some((a, b)) = line_extent(&graph, l.id) {
            println!(
                "line {:2}: length {:.3} m estimated, {:.3} m true",
                l.id,
                (b - a).norm(),
                (l.end - l.start).norm()
            );
        }
    }
    write_points_csv(BufWriter::new(File::create(format!("{out}/points.csv"))?), &graph)?;
    write_lines_csv(BufWriter::new(File::create(format!("{out}/lines.csv"))?), &graph)?;
    write_map_ply(BufWriter::new(File::create(format!("{out}/map.ply"))?), &graph)?;
    write_trajectory_ply(BufWriter::new(File::create(format!("{out}/trajectory.ply"))?), &graph)?;
    println!("wrote {out}/points.csv, lines.csv, map.ply, trajectory.ply");
    Ok(())
}
