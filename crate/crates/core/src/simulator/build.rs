//! Landmark triangulation and factor-graph construction from simulated
//! observations.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Vector3, Vector4, Vector6};

use super::render::{FrameObservations, Simulation};
use super::rng::SplitMix64;
use super::scene::SimScene;
use crate::error::{Error, Result};
use crate::geometry::{orthonormal_from_plucker, CameraIntrinsics, OrthonormalLine, PlueckerLine, Pose, PoseUpdate, Side};
use crate::measurement::{ImageLineSegment, MIN_DEPTH};
use crate::optimizer::{FactorGraph, Huber, LineEdge, PointEdge, PointMeasurement, CHI2_2DOF_95, CHI2_3DOF_95};

/// Default smallest angle between two back-projected planes for a line to be
/// triangulated, radians.
pub const MIN_LINE_PLANE_ANGLE: f64 = 0.02;

/// Which landmark types take part in estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureMode {
    Points,
    Lines,
    PointsAndLines,
}

impl FeatureMode {
    pub const ALL: [FeatureMode; 3] = [FeatureMode::Points, FeatureMode::Lines, FeatureMode::PointsAndLines];

    pub fn uses_points(self) -> bool {
        matches!(self, FeatureMode::Points | FeatureMode::PointsAndLines)
    }

    pub fn uses_lines(self) -> bool {
        matches!(self, FeatureMode::Lines | FeatureMode::PointsAndLines)
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureMode::Points => "points",
            FeatureMode::Lines => "lines",
            FeatureMode::PointsAndLines => "points+lines",
        })
    }
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "points" => Ok(FeatureMode::Points),
            "lines" => Ok(FeatureMode::Lines),
            "points+lines" => Ok(FeatureMode::PointsAndLines),
            other => Err(Error::Config(format!(
                "unknown feature mode {other:?} (expected points, lines or points+lines)"
            ))),
        }
    }
}

/// Robust kernels attached to new edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeKernels {
    pub stereo_point: Option<Huber>,
    pub mono_point: Option<Huber>,
    pub line: Option<Huber>,
}

impl Default for EdgeKernels {
    fn default() -> Self {
        Self {
            stereo_point: Some(Huber::from_chi2(CHI2_3DOF_95)),
            mono_point: Some(Huber::from_chi2(CHI2_2DOF_95)),
            line: Some(Huber::from_chi2(CHI2_2DOF_95)),
        }
    }
}

/// World point from a stereo observation `(u_left, v, u_right)` at left
/// camera pose `pose`. `None` for non-positive disparity.
pub fn triangulate_point_stereo(obs: &Vector3<f64>, pose: &Pose, k: &CameraIntrinsics) -> Option<Vector3<f64>> {
    let xc = k.triangulate_stereo(&obs.xy(), obs.z)?;
    if xc.z <= MIN_DEPTH {
        return None;
    }
    Some(pose.inverse().transform_point(&xc))
}

/// World plane `(a, d)` with `a·X + d = 0` and `‖a‖ = 1` through the camera
/// center of `side` and the observed image line.
pub fn back_projected_plane(seg: &ImageLineSegment, pose: &Pose, k: &CameraIntrinsics, side: Side) -> Vector4<f64> {
    let cam = k.side_pose(pose, side);
    let kl = k.k_matrix().transpose() * seg.image_line();
    let a = cam.rotation.inverse() * kl;
    let d = kl.dot(&cam.translation);
    let s = a.norm();
    Vector4::new(a.x / s, a.y / s, a.z / s, d / s)
}

/// Intersection of two planes as a Plücker line: `v = a1 × a2`,
/// `n = d1·a2 − d2·a1`.
pub fn line_from_planes(p1: &Vector4<f64>, p2: &Vector4<f64>) -> Result<PlueckerLine> {
    let (a1, a2) = (p1.xyz(), p2.xyz());
    let v = a1.cross(&a2);
    if v.norm() < 1e-12 {
        return Err(Error::DegenerateLine("parallel planes"));
    }
    let n = p1.w * a2 - p2.w * a1;
    Ok(PlueckerLine::new_unchecked(n, v).normalized())
}

fn plane_angle(p1: &Vector4<f64>, p2: &Vector4<f64>) -> f64 {
    p1.xyz().cross(&p2.xyz()).norm().clamp(0.0, 1.0).asin()
}

/// Triangulate a line from the pair of back-projected planes with the largest
/// angle between them, provided it exceeds `min_angle`.
pub fn triangulate_line(
    observations: &[(Pose, Side, ImageLineSegment)],
    k: &CameraIntrinsics,
    min_angle: f64,
) -> Option<PlueckerLine> {
    let planes: Vec<Vector4<f64>> = observations
        .iter()
        .map(|(pose, side, seg)| back_projected_plane(seg, pose, k, *side))
        .collect();
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 0..planes.len() {
        for j in i + 1..planes.len() {
            let a = plane_angle(&planes[i], &planes[j]);
            if best.map_or(true, |(b, _, _)| a > b) {
                best = Some((a, i, j));
            }
        }
    }
    let (angle, i, j) = best?;
    if angle < min_angle {
        return None;
    }
    line_from_planes(&planes[i], &planes[j]).ok()
}

/// Orthonormal form of a ground-truth scene segment.
pub fn scene_line(scene: &SimScene, id: usize) -> Result<OrthonormalLine> {
    let l = &scene.lines[id];
    orthonormal_from_plucker(&PlueckerLine::from_endpoints(&l.start, &l.end)?)
}

/// Add the edges of one frame to `graph` for landmarks already present in it.
pub fn add_frame_edges(
    graph: &mut FactorGraph,
    frame: &FrameObservations,
    pose_id: usize,
    mode: FeatureMode,
    kernels: &EdgeKernels,
) -> Result<()> {
    if mode.uses_points() {
        for p in &frame.points {
            if !graph.points.contains_key(&p.id) {
                continue;
            }
            if let Some(obs) = p.stereo() {
                graph.add_point_edge(PointEdge {
                    pose: pose_id,
                    point: p.id,
                    measurement: PointMeasurement::stereo(obs),
                    kernel: kernels.stereo_point,
                })?;
            } else {
                for side in [Side::Left, Side::Right] {
                    if let Some(px) = p.get(side) {
                        graph.add_point_edge(PointEdge {
                            pose: pose_id,
                            point: p.id,
                            measurement: PointMeasurement::mono(side, px),
                            kernel: kernels.mono_point,
                        })?;
                    }
                }
            }
        }
    }
    if mode.uses_lines() {
        for l in &frame.lines {
            if !graph.lines.contains_key(&l.id) {
                continue;
            }
            for side in [Side::Left, Side::Right] {
                if let Some(seg) = l.get(side) {
                    graph.add_line_edge(LineEdge {
                        pose: pose_id,
                        line: l.id,
                        side,
                        segment: *seg,
                        information: nalgebra::Matrix2::identity(),
                        kernel: kernels.line,
                    })?;
                }
            }
        }
    }
    Ok(())
}

/// How landmarks are initialized when building a graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LandmarkInit<'a> {
    /// Exact scene geometry.
    GroundTruth(&'a SimScene),
    /// Points from their first stereo observation, lines from the widest plane
    /// pair, both using the initial poses. Landmarks that cannot be
    /// triangulated are left out.
    Triangulate,
}

/// Graph with one pose per frame (frame 0 fixed), landmarks per `init` and
/// one edge per visible observation.
pub fn build_graph(
    frames: &[FrameObservations],
    k: &CameraIntrinsics,
    poses: &[Pose],
    init: LandmarkInit<'_>,
    mode: FeatureMode,
    kernels: &EdgeKernels,
) -> Result<FactorGraph> {
    if frames.is_empty() {
        return Err(Error::InvalidGraph("no observations".into()));
    }
    if poses.len() != frames.len() {
        return Err(Error::InvalidGraph(format!(
            "{} poses for {} frames",
            poses.len(),
            frames.len()
        )));
    }
    let mut graph = FactorGraph::new(*k);
    for (i, pose) in poses.iter().enumerate() {
        graph.add_pose(i, *pose, i == 0);
    }
    match init {
        LandmarkInit::GroundTruth(scene) => {
            if mode.uses_points() {
                for p in &scene.points {
                    graph.add_point(p.id, p.position, false);
                }
            }
            if mode.uses_lines() {
                for l in &scene.lines {
                    graph.add_line(l.id, scene_line(scene, l.id)?, false);
                }
            }
        }
        LandmarkInit::Triangulate => {
            if mode.uses_points() {
                for (f, pose) in frames.iter().zip(poses) {
                    for p in &f.points {
                        if graph.points.contains_key(&p.id) {
                            continue;
                        }
                        if let Some(x) = p.stereo().and_then(|o| triangulate_point_stereo(&o, pose, k)) {
                            graph.add_point(p.id, x, false);
                        }
                    }
                }
            }
            if mode.uses_lines() {
                let mut obs: std::collections::BTreeMap<usize, Vec<(Pose, Side, ImageLineSegment)>> =
                    Default::default();
                for (f, pose) in frames.iter().zip(poses) {
                    for l in &f.lines {
                        for side in [Side::Left, Side::Right] {
                            if let Some(seg) = l.get(side) {
                                obs.entry(l.id).or_default().push((*pose, side, *seg));
                            }
                        }
                    }
                }
                for (id, list) in obs {
                    if let Some(line) = triangulate_line(&list, k, MIN_LINE_PLANE_ANGLE) {
                        graph.add_line(id, orthonormal_from_plucker(&line)?, false);
                    }
                }
            }
        }
    }
    for (i, f) in frames.iter().enumerate() {
        add_frame_edges(&mut graph, f, i, mode, kernels)?;
    }
    if graph.edge_count() == 0 {
        return Err(Error::InvalidGraph("no usable observations".into()));
    }
    Ok(graph)
}

/// Initialization of a graph built from a simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitMode {
    /// Poses and landmarks at ground truth.
    GroundTruth,
    /// Every pose but the first moved by `Exp(δξ)` with each tangent coordinate
    /// drawn from N(0, σ²); landmarks triangulated from the moved poses.
    Perturbed { pose_sigma: f64, seed: u64 },
}

/// Ground-truth poses perturbed on every tangent coordinate, first pose kept.
pub fn perturb_poses(poses: &[Pose], sigma: f64, seed: u64) -> Vec<Pose> {
    let mut rng = SplitMix64::stream(seed, u64::MAX);
    poses
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if i == 0 {
                *p
            } else {
                let d = Vector6::from_fn(|_, _| rng.normal(sigma));
                p.update(&PoseUpdate(d))
            }
        })
        .collect()
}

pub fn build_graph_from_sim(sim: &Simulation, init: InitMode, mode: FeatureMode) -> Result<FactorGraph> {
    let k = &sim.config.intrinsics;
    let kernels = EdgeKernels::default();
    match init {
        InitMode::GroundTruth => build_graph(
            &sim.frames,
            k,
            &sim.poses,
            LandmarkInit::GroundTruth(&sim.scene),
            mode,
            &kernels,
        ),
        InitMode::Perturbed { pose_sigma, seed } => {
            let poses = perturb_poses(&sim.poses, pose_sigma, seed);
            build_graph(&sim.frames, k, &poses, LandmarkInit::Triangulate, mode, &kernels)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::SimConfig;

    fn noise_free() -> Simulation {
        Simulation::run(&SimConfig {
            noise_sigma: 0.0,
            n_points: 40,
            ..SimConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn ground_truth_graph_has_zero_cost() {
        let sim = noise_free();
        for mode in FeatureMode::ALL {
            let g = build_graph_from_sim(&sim, InitMode::GroundTruth, mode).unwrap();
            assert!(g.total_cost() < 1e-18, "{mode}: {}", g.total_cost());
            assert_eq!(g.lines.is_empty(), !mode.uses_lines());
            assert_eq!(g.points.is_empty(), !mode.uses_points());
        }
    }

    #[test]
    fn triangulation_is_exact_without_noise() {
        let sim = noise_free();
        let g = build_graph(
            &sim.frames,
            &sim.config.intrinsics,
            &sim.poses,
            LandmarkInit::Triangulate,
            FeatureMode::PointsAndLines,
            &EdgeKernels::default(),
        )
        .unwrap();
        assert_eq!(g.lines.len(), 25);
        for (id, v) in &g.points {
            assert!((v.position - sim.scene.points[*id].position).norm() < 1e-9);
        }
        for (id, v) in &g.lines {
            let truth = scene_line(&sim.scene, *id).unwrap().to_plucker();
            assert!(v.line.to_plucker().projective_distance(&truth) < 1e-9);
        }
    }

    #[test]
    fn plane_intersection_contains_both_points() {
        let p = Vector3::new(0.3, -1.0, 2.0);
        let q = Vector3::new(1.0, 0.5, -0.5);
        let v = q - p;
        let a1 = v.cross(&Vector3::new(0.0, 0.0, 1.0)).normalize();
        let a2 = v.cross(&Vector3::new(1.0, 0.0, 0.0)).normalize();
        let pl1 = Vector4::new(a1.x, a1.y, a1.z, -a1.dot(&p));
        let pl2 = Vector4::new(a2.x, a2.y, a2.z, -a2.dot(&p));
        let l = line_from_planes(&pl1, &pl2).unwrap();
        assert!(l.contains_point(&p, 1e-12));
        assert!(l.contains_point(&q, 1e-12));
    }

    #[test]
    fn empty_observations_are_rejected() {
        let k = CameraIntrinsics::default();
        let r = build_graph(&[], &k, &[], LandmarkInit::Triangulate, FeatureMode::Points, &EdgeKernels::default());
        assert!(matches!(r, Err(Error::InvalidGraph(_))));
    }

    #[test]
    fn feature_mode_parses() {
        for m in FeatureMode::ALL {
            assert_eq!(m.to_string().parse::<FeatureMode>().unwrap(), m);
        }
        assert!("both".parse::<FeatureMode>().is_err());
    }
}
