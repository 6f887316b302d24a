//! Monte-Carlo runs over the simulated house: one simulation per run seed,
//! estimated with each requested feature mode, scored against ground truth.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evaluation::{ate, rpe_rmse, Trajectory, DEFAULT_RPE_DELTA};
use crate::geometry::Pose;
use crate::odometry::{run_odometry, OdometryConfig};
use crate::optimizer::{solve_lm, FactorGraph, SolveOptions, SolveReport, Termination};
use crate::simulator::{build_graph_from_sim, FeatureMode, InitMode, SimConfig, Simulation};

/// How the estimate of a run is produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    /// Full bundle adjustment from ground truth.
    GroundTruth,
    /// Full bundle adjustment from poses perturbed with this tangent-space
    /// standard deviation and triangulated landmarks.
    Perturbed(f64),
    /// Stereo odometry; no global adjustment afterwards.
    Odometry,
}

/// Tangent-space standard deviation used by `perturbed` when none is given.
pub const DEFAULT_PERTURBATION: f64 = 0.05;

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimator::GroundTruth => f.write_str("ground-truth"),
            Estimator::Perturbed(_) => f.write_str("perturbed"),
            Estimator::Odometry => f.write_str("odometry"),
        }
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ground-truth" => Ok(Estimator::GroundTruth),
            "perturbed" => Ok(Estimator::Perturbed(DEFAULT_PERTURBATION)),
            "odometry" => Ok(Estimator::Odometry),
            other => Err(Error::Config(format!(
                "unknown init mode {other:?} (expected ground-truth, perturbed or odometry)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Base simulation; run `r` uses seed `sim.seed + r`.
    pub sim: SimConfig,
    pub runs: usize,
    pub modes: Vec<FeatureMode>,
    pub estimator: Estimator,
    pub solve: SolveOptions,
    pub odometry: OdometryConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            runs: 25,
            modes: FeatureMode::ALL.to_vec(),
            estimator: Estimator::Odometry,
            solve: SolveOptions::default(),
            odometry: OdometryConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub mode: FeatureMode,
    pub rpe_trans: f64,
    pub rpe_rot: f64,
    pub ate: f64,
    pub iterations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub termination: Option<Termination>,
    /// Estimated camera-to-world trajectory.
    pub trajectory: Trajectory,
    /// Final graph at the estimate.
    pub graph: FactorGraph,
}

/// Estimate one simulation with one feature mode.
pub fn estimate(sim: &Simulation, mode: FeatureMode, estimator: Estimator, solve: &SolveOptions, odo: &OdometryConfig) -> Result<(FactorGraph, Option<SolveReport>, usize)> {
    match estimator {
        Estimator::Odometry => {
            let r = run_odometry(&sim.frames, &sim.config.intrinsics, sim.poses[0], mode, odo)?;
            Ok((r.graph, None, r.iterations))
        }
        Estimator::GroundTruth | Estimator::Perturbed(_) => {
            let init = match estimator {
                Estimator::Perturbed(sigma) => InitMode::Perturbed {
                    pose_sigma: sigma,
                    seed: sim.config.seed,
                },
                _ => InitMode::GroundTruth,
            };
            let mut graph = build_graph_from_sim(sim, init, mode)?;
            let report = solve_lm(&mut graph, solve)?;
            let iters = report.iterations;
            Ok((graph, Some(report), iters))
        }
    }
}

fn score(sim: &Simulation, graph: &FactorGraph) -> Result<(Trajectory, f64, f64, f64)> {
    let times: Vec<f64> = sim.frames.iter().map(|f| f.timestamp).collect();
    let poses: Vec<Pose> = (0..sim.frames.len())
        .map(|i| graph.poses.get(&i).map(|v| v.pose).ok_or(Error::InvalidGraph(format!("pose {i} missing"))))
        .collect::<Result<_>>()?;
    let est = Trajectory::from_world_to_camera(&times, &poses)?;
    let gt = Trajectory::from_world_to_camera(&times, &sim.poses)?;
    let (t, r) = rpe_rmse(&est, &gt, DEFAULT_RPE_DELTA)?;
    let a = ate(&est, &gt, true)?;
    Ok((est, t, r, a))
}

/// Run `r` of the experiment for every configured feature mode.
pub fn run_once(cfg: &ExperimentConfig, run: usize) -> Result<Vec<RunResult>> {
    let seed = cfg.sim.seed.wrapping_add(run as u64);
    let sim = Simulation::run(&SimConfig { seed, ..cfg.sim })?;
    cfg.modes
        .iter()
        .map(|&mode| {
            let (graph, report, iterations) = estimate(&sim, mode, cfg.estimator, &cfg.solve, &cfg.odometry)?;
            let (trajectory, rpe_trans, rpe_rot, ate) = score(&sim, &graph)?;
            let final_cost = graph.total_cost();
            Ok(RunResult {
                run,
                seed,
                mode,
                rpe_trans,
                rpe_rot,
                ate,
                iterations,
                initial_cost: report.as_ref().map_or(final_cost, |r| r.initial_cost),
                final_cost,
                termination: report.map(|r| r.termination),
                trajectory,
                graph,
            })
        })
        .collect()
}

/// All runs, in parallel across runs; results are ordered by run, then by
/// feature mode as configured.
pub fn run_monte_carlo(cfg: &ExperimentConfig) -> Result<Vec<RunResult>> {
    let per_run: Vec<Result<Vec<RunResult>>> = (0..cfg.runs).into_par_iter().map(|r| run_once(cfg, r)).collect();
    let mut out = Vec::with_capacity(cfg.runs * cfg.modes.len());
    for r in per_run {
        out.extend(r?);
    }
    Ok(out)
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, v.sqrt())
}

/// Per feature mode: `(mode, runs, mean RPE trans, std, mean RPE rot, mean ATE)`.
pub fn aggregate(results: &[RunResult], modes: &[FeatureMode]) -> Vec<(FeatureMode, usize, f64, f64, f64, f64)> {
    modes
        .iter()
        .map(|&m| {
            let rows: Vec<&RunResult> = results.iter().filter(|r| r.mode == m).collect();
            let t: Vec<f64> = rows.iter().map(|r| r.rpe_trans).collect();
            let rot: Vec<f64> = rows.iter().map(|r| r.rpe_rot).collect();
            let a: Vec<f64> = rows.iter().map(|r| r.ate).collect();
            let (mt, st) = mean_std(&t);
            (m, rows.len(), mt, st, mean_std(&rot).0, mean_std(&a).0)
        })
        .collect()
}
