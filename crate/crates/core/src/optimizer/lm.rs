//! Levenberg–Marquardt over a [`FactorGraph`], plus the motion-only and
//! windowed variants used by odometry.

use std::collections::BTreeSet;
use std::fmt;

use super::graph::{FactorGraph, VertexId};
use super::problem::{NormalEquations, Problem};
use crate::error::{Error, Result};

/// Number of damped solves tried per iteration before giving up.
const MAX_INNER_RETRIES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Stop when the largest gradient entry falls below this value.
    pub gradient_tol: f64,
    /// Stop when an accepted step reduces the cost by less than this fraction.
    pub rel_cost_tol: f64,
    /// Initial damping; `None` uses `1e-4 · max diag(JᵀJ)`.
    pub initial_lambda: Option<f64>,
    /// Landmark count above which the Schur complement path is used.
    pub schur_threshold: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: 100,
            gradient_tol: 1e-10,
            rel_cost_tol: 1e-12,
            initial_lambda: None,
            schur_threshold: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Gradient or relative cost decrease fell under tolerance.
    Converged,
    /// The step became numerically zero.
    SmallStep,
    /// No damped step reduced the cost.
    NoProgress,
    /// The damped normal equations could not be factorized.
    Singular,
    MaxIterations,
    /// No free vertex is touched by an edge.
    NothingToOptimize,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Termination::Converged => "converged",
            Termination::SmallStep => "small_step",
            Termination::NoProgress => "no_progress",
            Termination::Singular => "singular",
            Termination::MaxIterations => "max_iterations",
            Termination::NothingToOptimize => "nothing_to_optimize",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    /// Cost before the first iteration followed by the cost after each one.
    pub cost_trace: Vec<f64>,
    /// Whether each iteration ended with an accepted step.
    pub accepted: Vec<bool>,
    pub termination: Termination,
}

/// Minimize the robust cost of every edge touching a free vertex, updating
/// the free vertices in place.
pub fn solve_lm(graph: &mut FactorGraph, opts: &SolveOptions) -> Result<SolveReport> {
    graph.validate()?;
    if graph.edge_count() == 0 {
        return Err(Error::InvalidGraph("graph has no edges".into()));
    }
    let snapshot = graph.clone();
    let problem = Problem::new(&snapshot);
    let mut state = problem.initial_state();
    let mut cost = problem.cost(&state);
    let mut report = SolveReport {
        iterations: 0,
        initial_cost: cost,
        final_cost: cost,
        cost_trace: vec![cost],
        accepted: Vec::new(),
        termination: Termination::NothingToOptimize,
    };
    if problem.layout.is_empty() || problem.active_edges() == 0 {
        return Ok(report);
    }

    let use_schur = problem.layout.landmarks.len() > opts.schur_threshold;
    let solve = |neq: &NormalEquations, lambda: f64| {
        if use_schur {
            neq.solve_schur(lambda)
        } else {
            neq.solve_dense(lambda)
        }
    };

    let mut neq = problem.assemble(&state);
    let mut lambda = opts.initial_lambda.unwrap_or_else(|| {
        let m = neq.max_diagonal();
        if m > 0.0 {
            1e-4 * m
        } else {
            1e-4
        }
    });
    report.termination = Termination::MaxIterations;

    for _ in 0..opts.max_iters {
        if neq.gradient_inf_norm() < opts.gradient_tol || cost == 0.0 {
            report.termination = Termination::Converged;
            break;
        }
        report.iterations += 1;
        let mut outcome = None;
        let mut singular = 0;
        for _ in 0..MAX_INNER_RETRIES {
            let Some(delta) = solve(&neq, lambda) else {
                singular += 1;
                lambda *= 2.0;
                continue;
            };
            if delta.amax() < 1e-15 {
                outcome = Some(Err(Termination::SmallStep));
                break;
            }
            let candidate = problem.retract(&state, &delta);
            let new_cost = problem.cost(&candidate);
            if new_cost.is_finite() && new_cost < cost {
                lambda /= 3.0;
                outcome = Some(Ok((candidate, new_cost)));
                break;
            }
            lambda *= 2.0;
        }
        match outcome {
            Some(Ok((candidate, new_cost))) => {
                let rel = (cost - new_cost) / cost.max(f64::MIN_POSITIVE);
                state = candidate;
                cost = new_cost;
                report.cost_trace.push(cost);
                report.accepted.push(true);
                if rel < opts.rel_cost_tol {
                    report.termination = Termination::Converged;
                    break;
                }
                neq = problem.assemble(&state);
            }
            Some(Err(reason)) => {
                report.cost_trace.push(cost);
                report.accepted.push(false);
                report.termination = reason;
                break;
            }
            None => {
                report.cost_trace.push(cost);
                report.accepted.push(false);
                report.termination = if singular == MAX_INNER_RETRIES {
                    Termination::Singular
                } else {
                    Termination::NoProgress
                };
                break;
            }
        }
    }

    problem.write_back(&state, graph);
    report.final_cost = cost;
    Ok(report)
}

/// Optimize a single pose against fixed landmarks.
pub fn motion_only_ba(graph: &mut FactorGraph, pose_id: VertexId, opts: &SolveOptions) -> Result<SolveReport> {
    if !graph.poses.contains_key(&pose_id) {
        return Err(Error::InvalidGraph(format!("pose {pose_id} does not exist")));
    }
    let observed = graph.point_edges.iter().any(|e| e.pose == pose_id) || graph.line_edges.iter().any(|e| e.pose == pose_id);
    if !observed {
        return Err(Error::InvalidGraph(format!("pose {pose_id} has no edges")));
    }
    with_fixed_flags(
        graph,
        |id| id != pose_id,
        |_| true,
        |_| true,
        |g| solve_lm(g, opts),
    )
}

/// Optimize the poses in `active` (unless already fixed) and the landmarks
/// they observe; everything else is held fixed.
pub fn local_ba(graph: &mut FactorGraph, active: &[VertexId], opts: &SolveOptions) -> Result<SolveReport> {
    let free_poses: BTreeSet<VertexId> = active
        .iter()
        .copied()
        .filter(|id| graph.poses.get(id).is_some_and(|p| !p.fixed))
        .collect();
    let points: BTreeSet<VertexId> = graph
        .point_edges
        .iter()
        .filter(|e| free_poses.contains(&e.pose))
        .map(|e| e.point)
        .collect();
    let lines: BTreeSet<VertexId> = graph
        .line_edges
        .iter()
        .filter(|e| free_poses.contains(&e.pose))
        .map(|e| e.line)
        .collect();
    with_fixed_flags(
        graph,
        |id| !free_poses.contains(&id),
        |id| !points.contains(&id),
        |id| !lines.contains(&id),
        |g| solve_lm(g, opts),
    )
}

/// Run `f` with extra vertices fixed, restoring the original flags afterward.
fn with_fixed_flags<T>(
    graph: &mut FactorGraph,
    fix_pose: impl Fn(VertexId) -> bool,
    fix_point: impl Fn(VertexId) -> bool,
    fix_line: impl Fn(VertexId) -> bool,
    f: impl FnOnce(&mut FactorGraph) -> Result<T>,
) -> Result<T> {
    let poses: Vec<(VertexId, bool)> = graph.poses.iter().map(|(id, v)| (*id, v.fixed)).collect();
    let points: Vec<(VertexId, bool)> = graph.points.iter().map(|(id, v)| (*id, v.fixed)).collect();
    let lines: Vec<(VertexId, bool)> = graph.lines.iter().map(|(id, v)| (*id, v.fixed)).collect();
    for (id, v) in graph.poses.iter_mut() {
        v.fixed |= fix_pose(*id);
    }
    for (id, v) in graph.points.iter_mut() {
        v.fixed |= fix_point(*id);
    }
    for (id, v) in graph.lines.iter_mut() {
        v.fixed |= fix_line(*id);
    }
    let out = f(graph);
    for (id, fixed) in poses {
        graph.poses.get_mut(&id).unwrap().fixed = fixed;
    }
    for (id, fixed) in points {
        graph.points.get_mut(&id).unwrap().fixed = fixed;
    }
    for (id, fixed) in lines {
        graph.lines.get_mut(&id).unwrap().fixed = fixed;
    }
    out
}
