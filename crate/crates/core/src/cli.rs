//! Command-line front end: simulate, solve, check-jacobians, evaluate, export.
//!
//! Exit codes: 0 success, 2 usage error, 3 I/O or parse error, 4
//! verification failure, 1 any other error.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::{Error, Result};
use crate::evaluation::{
    ate, read_trajectory, rpe_rmse, write_metrics_csv, write_trajectory, MetricsRow, Trajectory, DEFAULT_RPE_DELTA,
};
use crate::export::{write_lines_csv, write_map_ply, write_points_csv, write_poses_csv, write_trajectory_ply};
use crate::montecarlo::{aggregate, run_monte_carlo, Estimator, ExperimentConfig, RunResult};
use crate::optimizer::{read_graph, solve_lm, write_graph, SolveOptions};
use crate::simulator::{write_observations, write_scene, FeatureMode, SimConfig, Simulation};
use crate::verify::check_jacobians;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_VERIFICATION: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "plslam", version, about = "Point and line stereo bundle adjustment on a synthetic house scene")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the house scene, the orbit and noisy stereo observations.
    Simulate(SimulateArgs),
    /// Estimate trajectories on simulated data (Monte-Carlo) or a graph file.
    Solve(SolveArgs),
    /// Compare analytic Jacobians with finite differences.
    CheckJacobians(CheckArgs),
    /// RPE and ATE of an estimated TUM trajectory against ground truth.
    Evaluate(EvaluateArgs),
    /// Write the map and trajectory of a graph snapshot as CSV or PLY.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SceneArgs {
    /// Base random seed; run `r` uses `seed + r`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of points sampled on the house.
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    /// Standard deviation of pixel noise.
    #[arg(long, default_value_t = 1.0)]
    pub noise_sigma: f64,
    /// Number of frames on the orbit.
    #[arg(long, default_value_t = 100)]
    pub frames: usize,
}

impl SceneArgs {
    fn sim_config(&self) -> SimConfig {
        let mut cfg = SimConfig {
            n_points: self.points,
            noise_sigma: self.noise_sigma,
            seed: self.seed,
            ..SimConfig::default()
        };
        cfg.trajectory.n_frames = self.frames;
        cfg
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FeatureArg {
    Points,
    Lines,
    #[value(name = "points+lines")]
    PointsLines,
    All,
}

impl FeatureArg {
    fn modes(self) -> Vec<FeatureMode> {
        match self {
            FeatureArg::Points => vec![FeatureMode::Points],
            FeatureArg::Lines => vec![FeatureMode::Lines],
            FeatureArg::PointsLines => vec![FeatureMode::PointsAndLines],
            FeatureArg::All => FeatureMode::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    GroundTruth,
    Perturbed,
    Odometry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    Csv,
    Ply,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Number of Monte-Carlo runs.
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    #[arg(long, value_enum, default_value_t = FeatureArg::All)]
    pub feature_mode: FeatureArg,
    /// `odometry` tracks frame by frame without global adjustment; the other
    /// two run full bundle adjustment from the named initialization.
    #[arg(long, value_enum, default_value_t = InitArg::Odometry)]
    pub init_mode: InitArg,
    /// Iteration limit of full bundle adjustment.
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
    pub format: ReportFormat,
    /// Solve this graph snapshot instead of simulating.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Also write the final graph snapshot of every run.
    #[arg(long)]
    pub save_graph: bool,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-5)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Estimated trajectory (TUM format).
    pub estimate: PathBuf,
    /// Ground-truth trajectory (TUM format).
    pub ground_truth: PathBuf,
    /// Frame offset of the relative pose error.
    #[arg(long, default_value_t = DEFAULT_RPE_DELTA)]
    pub delta: usize,
    /// Skip rigid alignment before ATE.
    #[arg(long)]
    pub no_align: bool,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Graph snapshot to export.
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = ExportFormat::Csv)]
    pub format: ExportFormat,
}

/// Exit code for an error returned by a command.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) | Error::Parse { .. } => EXIT_IO,
        Error::Config(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display()))))
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let sim = Simulation::run(&args.scene.sim_config())?;
    ensure_dir(&args.out_dir)?;
    write_scene(create(&args.out_dir.join("scene.txt"))?, &sim.scene)?;
    write_observations(create(&args.out_dir.join("observations.txt"))?, &sim.frames)?;
    let times: Vec<f64> = sim.frames.iter().map(|f| f.timestamp).collect();
    let gt = Trajectory::from_world_to_camera(&times, &sim.poses)?;
    write_trajectory(create(&args.out_dir.join("groundtruth.tum"))?, &gt)?;
    println!(
        "simulated {} frames, {} lines, {} points into {}",
        sim.frames.len(),
        sim.scene.lines.len(),
        sim.scene.points.len(),
        args.out_dir.display()
    );
    Ok(())
}

fn mode_tag(mode: FeatureMode) -> String {
    mode.to_string().replace('+', "_")
}

fn termination_text(r: &RunResult) -> String {
    r.termination.map_or_else(|| "odometry".to_string(), |t| t.to_string())
}

const REPORT_HEADER: &str =
    "run,seed,feature_mode,rpe_trans_m,rpe_rot_rad,ate_m,iterations,initial_cost,final_cost,termination";

fn write_report_csv<W: Write>(mut out: W, results: &[RunResult], modes: &[FeatureMode]) -> Result<()> {
    writeln!(out, "{REPORT_HEADER}")?;
    for r in results {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.run,
            r.seed,
            r.mode,
            r.rpe_trans,
            r.rpe_rot,
            r.ate,
            r.iterations,
            r.initial_cost,
            r.final_cost,
            termination_text(r)
        )?;
    }
    for (mode, n, mt, st, mr, ma) in aggregate(results, modes) {
        writeln!(out, "mean,,{mode},{mt},{mr},{ma},,,,runs={n}")?;
        writeln!(out, "std,,{mode},{st},,,,,,runs={n}")?;
    }
    Ok(())
}

fn write_report_json<W: Write>(mut out: W, results: &[RunResult], modes: &[FeatureMode]) -> Result<()> {
    let runs: Vec<_> = results
        .iter()
        .map(|r| {
            json!({
                "run": r.run,
                "seed": r.seed,
                "feature_mode": r.mode.to_string(),
                "rpe_trans_m": r.rpe_trans,
                "rpe_rot_rad": r.rpe_rot,
                "ate_m": r.ate,
                "iterations": r.iterations,
                "initial_cost": r.initial_cost,
                "final_cost": r.final_cost,
                "termination": termination_text(r),
            })
        })
        .collect();
    let agg: Vec<_> = aggregate(results, modes)
        .into_iter()
        .map(|(mode, n, mt, st, mr, ma)| {
            json!({
                "feature_mode": mode.to_string(),
                "runs": n,
                "rpe_trans_mean_m": mt,
                "rpe_trans_std_m": st,
                "rpe_rot_mean_rad": mr,
                "ate_mean_m": ma,
            })
        })
        .collect();
    let doc = json!({ "runs": runs, "aggregate": agg });
    serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| Error::Io(e.into()))?;
    writeln!(out)?;
    Ok(())
}

fn solve_graph_file(args: &SolveArgs, path: &Path) -> Result<()> {
    let mut graph = read_graph(open(path)?, &path.display().to_string())?;
    let opts = SolveOptions {
        max_iters: args.max_iters,
        ..SolveOptions::default()
    };
    let report = solve_lm(&mut graph, &opts)?;
    ensure_dir(&args.out_dir)?;
    write_graph(create(&args.out_dir.join("solved_graph.txt"))?, &graph)?;
    let entries = graph
        .poses
        .iter()
        .map(|(id, v)| (*id as f64 * SimConfig::default().trajectory.frame_interval, v.pose.inverse()))
        .collect();
    write_trajectory(create(&args.out_dir.join("trajectory.tum"))?, &Trajectory::from_entries(entries)?)?;
    let mut out = create(&args.out_dir.join("solve_report.csv"))?;
    writeln!(out, "iteration,cost,accepted")?;
    for (i, c) in report.cost_trace.iter().enumerate() {
        let accepted = if i == 0 { "" } else if report.accepted[i - 1] { "1" } else { "0" };
        writeln!(out, "{i},{c},{accepted}")?;
    }
    writeln!(out, "# termination={} iterations={}", report.termination, report.iterations)?;
    println!(
        "{} iterations ({}), cost {} -> {}",
        report.iterations, report.termination, report.initial_cost, report.final_cost
    );
    Ok(())
}

pub fn cmd_solve(args: &SolveArgs) -> Result<()> {
    if let Some(path) = &args.graph {
        return solve_graph_file(args, path);
    }
    if args.runs == 0 {
        return Err(Error::Config("--runs must be at least 1".into()));
    }
    let estimator = match args.init_mode {
        InitArg::GroundTruth => Estimator::GroundTruth,
        InitArg::Perturbed => Estimator::Perturbed(crate::montecarlo::DEFAULT_PERTURBATION),
        InitArg::Odometry => Estimator::Odometry,
    };
    let sim = args.scene.sim_config();
    sim.validate()?;
    let cfg = ExperimentConfig {
        sim,
        runs: args.runs,
        modes: args.feature_mode.modes(),
        estimator,
        solve: SolveOptions {
            max_iters: args.max_iters,
            ..SolveOptions::default()
        },
        ..ExperimentConfig::default()
    };
    let results = run_monte_carlo(&cfg)?;

    ensure_dir(&args.out_dir)?;
    for r in &results {
        let stem = format!("{}_run{:03}", mode_tag(r.mode), r.run);
        write_trajectory(create(&args.out_dir.join(format!("trajectory_{stem}.tum")))?, &r.trajectory)?;
        if args.save_graph {
            write_graph(create(&args.out_dir.join(format!("graph_{stem}.txt")))?, &r.graph)?;
        }
    }
    match args.format {
        ReportFormat::Csv => write_report_csv(create(&args.out_dir.join("report.csv"))?, &results, &cfg.modes)?,
        ReportFormat::Json => write_report_json(create(&args.out_dir.join("report.json"))?, &results, &cfg.modes)?,
    }
    for (mode, n, mt, st, mr, ma) in aggregate(&results, &cfg.modes) {
        println!("{mode:<13} runs={n} rpe_trans={mt:.5}±{st:.5} m rpe_rot={mr:.5} rad ate={ma:.4} m");
    }
    Ok(())
}

/// Returns whether every block passed.
pub fn cmd_check_jacobians(args: &CheckArgs) -> Result<bool> {
    if args.trials == 0 {
        eprintln!("warning: --trials 0 checks nothing");
    }
    let report = check_jacobians(args.trials, args.seed, args.tolerance, None);
    print!("{report}");
    println!("{}", if report.passed() { "PASS" } else { "FAIL" });
    Ok(report.passed())
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let est = read_trajectory(open(&args.estimate)?, &args.estimate.display().to_string())?;
    let gt = read_trajectory(open(&args.ground_truth)?, &args.ground_truth.display().to_string())?;
    let (t, r) = rpe_rmse(&est, &gt, args.delta)?;
    let a = ate(&est, &gt, !args.no_align)?;
    let row = MetricsRow {
        label: args.estimate.file_name().map_or_else(String::new, |s| s.to_string_lossy().into_owned()),
        rpe_trans: t,
        rpe_rot: r,
        ate: a,
    };
    match &args.out {
        Some(p) => write_metrics_csv(create(p)?, &[row]),
        None => write_metrics_csv(std::io::stdout().lock(), &[row]),
    }
}

pub fn cmd_export(args: &ExportArgs) -> Result<()> {
    let graph = read_graph(open(&args.graph)?, &args.graph.display().to_string())?;
    ensure_dir(&args.out_dir)?;
    match args.format {
        ExportFormat::Csv => {
            write_points_csv(create(&args.out_dir.join("map_points.csv"))?, &graph)?;
            write_lines_csv(create(&args.out_dir.join("map_lines.csv"))?, &graph)?;
            write_poses_csv(create(&args.out_dir.join("trajectory.csv"))?, &graph)?;
        }
        ExportFormat::Ply => {
            write_map_ply(create(&args.out_dir.join("map.ply"))?, &graph)?;
            write_trajectory_ply(create(&args.out_dir.join("trajectory.ply"))?, &graph)?;
        }
    }
    Ok(())
}

/// Parse `args`, run the command and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a).map(|_| true),
        Command::Solve(a) => cmd_solve(a).map(|_| true),
        Command::CheckJacobians(a) => cmd_check_jacobians(a),
        Command::Evaluate(a) => cmd_evaluate(a).map(|_| true),
        Command::Export(a) => cmd_export(a).map(|_| true),
    };
    match outcome {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_VERIFICATION,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
