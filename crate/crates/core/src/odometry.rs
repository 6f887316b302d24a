//! Stereo odometry over simulated observations.
//!
//! Each new frame is predicted with a constant-velocity model and tracked by
//! motion-only bundle adjustment against the current map. New landmarks are
//! then triangulated: points from their stereo pair, lines from the widest
//! pair of back-projected planes accumulated so far. Finally a local bundle
//! adjustment refines the most recent frames together with the landmarks
//! they observe, holding a few older frames fixed as anchors. Without loop
//! closure the estimate drifts, which is what the relative pose error
//! measures.

use std::collections::BTreeMap;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{orthonormal_from_plucker, CameraIntrinsics, OrthonormalLine, Pose, Side};
use crate::measurement::ImageLineSegment;
use crate::optimizer::{solve_lm, FactorGraph, SolveOptions};
use crate::simulator::{
    add_frame_edges, triangulate_line, triangulate_point_stereo, EdgeKernels, FeatureMode, FrameObservations,
    MIN_LINE_PLANE_ANGLE,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometryConfig {
    /// Number of most recent frames optimized by the local bundle adjustment.
    pub window: usize,
    /// Number of fixed frames preceding the window whose observations are kept.
    pub anchors: usize,
    /// Smallest plane angle for triangulating a line, radians.
    pub min_line_angle: f64,
    pub tracking: SolveOptions,
    pub local: SolveOptions,
    pub kernels: EdgeKernels,
}

impl Default for OdometryConfig {
    fn default() -> Self {
        Self {
            window: 5,
            anchors: 3,
            min_line_angle: MIN_LINE_PLANE_ANGLE,
            tracking: SolveOptions {
                max_iters: 20,
                ..SolveOptions::default()
            },
            local: SolveOptions {
                max_iters: 10,
                ..SolveOptions::default()
            },
            kernels: EdgeKernels::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OdometryResult {
    /// Estimated world-to-camera pose per frame.
    pub poses: Vec<Pose>,
    /// Graph over all frames with every observation of a mapped landmark,
    /// initialized at the odometry estimate; frame 0 is fixed.
    pub graph: FactorGraph,
    /// Total solver iterations over all tracking and local adjustments.
    pub iterations: usize,
}

struct Map {
    points: BTreeMap<usize, Vector3<f64>>,
    lines: BTreeMap<usize, OrthonormalLine>,
    pending_lines: BTreeMap<usize, Vec<(usize, Side, ImageLineSegment)>>,
}

/// Predicted pose of the next frame assuming the last relative motion repeats.
pub fn constant_velocity_prediction(poses: &[Pose]) -> Option<Pose> {
    match poses {
        [] => None,
        [only] => Some(*only),
        [.., a, b] => Some(b.compose(&a.inverse()).compose(b)),
    }
}

fn local_graph(
    frames: &[FrameObservations],
    k: &CameraIntrinsics,
    poses: &[Pose],
    map: &Map,
    free: std::ops::RangeInclusive<usize>,
    fixed: std::ops::Range<usize>,
    free_landmarks: bool,
    mode: FeatureMode,
    kernels: &EdgeKernels,
) -> Result<FactorGraph> {
    let mut g = FactorGraph::new(*k);
    for i in fixed.clone() {
        g.add_pose(i, poses[i], true);
    }
    for i in free.clone() {
        g.add_pose(i, poses[i], i == 0);
    }
    for i in free.clone() {
        let f = &frames[i];
        if mode.uses_points() {
            for p in &f.points {
                if let Some(x) = map.points.get(&p.id) {
                    g.add_point(p.id, *x, !free_landmarks);
                }
            }
        }
        if mode.uses_lines() {
            for l in &f.lines {
                if let Some(o) = map.lines.get(&l.id) {
                    g.add_line(l.id, *o, !free_landmarks);
                }
            }
        }
    }
    for i in fixed.chain(free) {
        add_frame_edges(&mut g, &frames[i], i, mode, kernels)?;
    }
    Ok(g)
}

fn write_back(g: &FactorGraph, poses: &mut [Pose], map: &mut Map) {
    for (id, v) in &g.poses {
        if !v.fixed {
            poses[*id] = v.pose;
        }
    }
    for (id, v) in &g.points {
        if !v.fixed {
            map.points.insert(*id, v.position);
        }
    }
    for (id, v) in &g.lines {
        if !v.fixed {
            map.lines.insert(*id, v.line);
        }
    }
}

fn triangulate_new(
    frame: &FrameObservations,
    index: usize,
    poses: &[Pose],
    k: &CameraIntrinsics,
    map: &mut Map,
    mode: FeatureMode,
    min_line_angle: f64,
) -> Result<()> {
    let pose = &poses[index];
    if mode.uses_points() {
        for p in &frame.points {
            if map.points.contains_key(&p.id) {
                continue;
            }
            if let Some(x) = p.stereo().and_then(|o| triangulate_point_stereo(&o, pose, k)) {
                map.points.insert(p.id, x);
            }
        }
    }
    if mode.uses_lines() {
        for l in &frame.lines {
            if map.lines.contains_key(&l.id) {
                continue;
            }
            let pending = map.pending_lines.entry(l.id).or_default();
            for side in [Side::Left, Side::Right] {
                if let Some(seg) = l.get(side) {
                    pending.push((index, side, *seg));
                }
            }
            let obs: Vec<(Pose, Side, ImageLineSegment)> =
                pending.iter().map(|(i, s, seg)| (poses[*i], *s, *seg)).collect();
            if let Some(line) = triangulate_line(&obs, k, min_line_angle) {
                map.lines.insert(l.id, orthonormal_from_plucker(&line)?);
                map.pending_lines.remove(&l.id);
            }
        }
    }
    Ok(())
}

/// Run stereo odometry over `frames`, starting from the known pose of frame 0.
pub fn run_odometry(
    frames: &[FrameObservations],
    k: &CameraIntrinsics,
    first_pose: Pose,
    mode: FeatureMode,
    cfg: &OdometryConfig,
) -> Result<OdometryResult> {
    if frames.is_empty() {
        return Err(Error::InvalidGraph("no observations".into()));
    }
    if cfg.window == 0 {
        return Err(Error::Config("odometry window must hold at least one frame".into()));
    }
    let mut map = Map {
        points: BTreeMap::new(),
        lines: BTreeMap::new(),
        pending_lines: BTreeMap::new(),
    };
    let mut poses = vec![first_pose];
    let mut iterations = 0;
    triangulate_new(&frames[0], 0, &poses, k, &mut map, mode, cfg.min_line_angle)?;

    for i in 1..frames.len() {
        let predicted = constant_velocity_prediction(&poses).expect("at least one pose");
        poses.push(predicted);

        let mut tracking = local_graph(frames, k, &poses, &map, i..=i, 0..0, false, mode, &cfg.kernels)?;
        if tracking.edge_count() > 0 {
            let report = solve_lm(&mut tracking, &cfg.tracking)?;
            iterations += report.iterations;
            write_back(&tracking, &mut poses, &mut map);
        }

        triangulate_new(&frames[i], i, &poses, k, &mut map, mode, cfg.min_line_angle)?;

        let first_free = (i + 1).saturating_sub(cfg.window).max(1);
        let first_anchor = first_free.saturating_sub(cfg.anchors);
        let mut local = local_graph(
            frames,
            k,
            &poses,
            &map,
            first_free..=i,
            first_anchor..first_free,
            true,
            mode,
            &cfg.kernels,
        )?;
        if local.edge_count() > 0 {
            let report = solve_lm(&mut local, &cfg.local)?;
            iterations += report.iterations;
            write_back(&local, &mut poses, &mut map);
        }
    }

    let mut graph = FactorGraph::new(*k);
    for (i, p) in poses.iter().enumerate() {
        graph.add_pose(i, *p, i == 0);
    }
    for (id, x) in &map.points {
        graph.add_point(*id, *x, false);
    }
    for (id, o) in &map.lines {
        graph.add_line(*id, *o, false);
    }
    for (i, f) in frames.iter().enumerate() {
        add_frame_edges(&mut graph, f, i, mode, &cfg.kernels)?;
    }
    Ok(OdometryResult {
        poses,
        graph,
        iterations,
    })
}
