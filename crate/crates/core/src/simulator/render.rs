//! Stereo rendering of the scene with pixel noise and perfect association.

use nalgebra::Vector2;

use super::rng::SplitMix64;
use super::scene::{SimConfig, SimScene};
use crate::frontend::{cull_line, Segment2D};
use crate::geometry::{CameraIntrinsics, Pose, Side};
use crate::measurement::{ImageLineSegment, MIN_DEPTH};

/// Clipped segments shorter than this many pixels are dropped.
pub const MIN_SEGMENT_PIXELS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointFeature {
    pub id: usize,
    pub left: Option<Vector2<f64>>,
    pub right: Option<Vector2<f64>>,
}

impl PointFeature {
    /// `(u_left, v_left, u_right)` when seen by both cameras.
    pub fn stereo(&self) -> Option<nalgebra::Vector3<f64>> {
        match (self.left, self.right) {
            (Some(l), Some(r)) => Some(nalgebra::Vector3::new(l.x, l.y, r.x)),
            _ => None,
        }
    }

    pub fn get(&self, side: Side) -> Option<Vector2<f64>> {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFeature {
    pub id: usize,
    pub left: Option<ImageLineSegment>,
    pub right: Option<ImageLineSegment>,
}

impl LineFeature {
    pub fn get(&self, side: Side) -> Option<&ImageLineSegment> {
        match side {
            Side::Left => self.left.as_ref(),
            Side::Right => self.right.as_ref(),
        }
    }
}

/// Everything observed from one stereo frame. Features seen by neither camera
/// are omitted; `None` on a side means not visible there.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameObservations {
    pub frame: usize,
    pub timestamp: f64,
    /// Ground-truth world-to-left-camera pose.
    pub pose: Pose,
    pub points: Vec<PointFeature>,
    pub lines: Vec<LineFeature>,
}

fn in_image(p: &Vector2<f64>, size: (f64, f64)) -> bool {
    p.x >= 0.0 && p.x <= size.0 && p.y >= 0.0 && p.y <= size.1
}

fn render_point(
    x: &nalgebra::Vector3<f64>,
    pose: &Pose,
    k: &CameraIntrinsics,
    side: Side,
    size: (f64, f64),
) -> Option<Vector2<f64>> {
    let xc = k.side_pose(pose, side).transform_point(x);
    if xc.z <= MIN_DEPTH {
        return None;
    }
    let px = k.project(&xc);
    in_image(&px, size).then_some(px)
}

fn render_line(
    start: &nalgebra::Vector3<f64>,
    end: &nalgebra::Vector3<f64>,
    pose: &Pose,
    k: &CameraIntrinsics,
    side: Side,
    size: (f64, f64),
) -> Option<Segment2D> {
    cull_line(start, end, &k.side_pose(pose, side), k, size).filter(|s| s.length() >= MIN_SEGMENT_PIXELS)
}

/// Project every landmark into both cameras of every frame and add i.i.d.
/// Gaussian noise of `cfg.noise_sigma` pixels to point pixels and to line
/// endpoints. Frame `k` draws its noise from stream `k + 1` of `cfg.seed`.
pub fn render_observations(scene: &SimScene, poses: &[Pose], cfg: &SimConfig) -> Vec<FrameObservations> {
    let k = &cfg.intrinsics;
    let size = cfg.image_size();
    let sigma = cfg.noise_sigma;
    poses
        .iter()
        .enumerate()
        .map(|(frame, pose)| {
            let mut rng = SplitMix64::stream(cfg.seed, frame as u64 + 1);
            let mut noisy = |p: Vector2<f64>| {
                let dx = rng.normal(sigma);
                let dy = rng.normal(sigma);
                p + Vector2::new(dx, dy)
            };
            let mut points = Vec::new();
            for p in &scene.points {
                let left = render_point(&p.position, pose, k, Side::Left, size);
                let right = render_point(&p.position, pose, k, Side::Right, size);
                if left.is_none() && right.is_none() {
                    continue;
                }
                points.push(PointFeature {
                    id: p.id,
                    left: left.map(&mut noisy),
                    right: right.map(&mut noisy),
                });
            }
            let mut lines = Vec::new();
            for l in &scene.lines {
                let left = render_line(&l.start, &l.end, pose, k, Side::Left, size);
                let right = render_line(&l.start, &l.end, pose, k, Side::Right, size);
                if left.is_none() && right.is_none() {
                    continue;
                }
                let mut seg = |s: Segment2D| ImageLineSegment::new(noisy(s.start), noisy(s.end));
                lines.push(LineFeature {
                    id: l.id,
                    left: left.map(&mut seg),
                    right: right.map(&mut seg),
                });
            }
            FrameObservations {
                frame,
                timestamp: frame as f64 * cfg.trajectory.frame_interval,
                pose: *pose,
                points,
                lines,
            }
        })
        .collect()
}

/// Scene, trajectory and observations of one simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub config: SimConfig,
    pub scene: SimScene,
    pub poses: Vec<Pose>,
    pub frames: Vec<FrameObservations>,
}

impl Simulation {
    pub fn run(cfg: &SimConfig) -> crate::Result<Self> {
        cfg.validate()?;
        let scene = super::scene::generate_house_scene(cfg.n_points, cfg.seed);
        let poses = super::scene::generate_trajectory_around(&cfg.trajectory, &scene.centroid());
        let frames = render_observations(&scene, &poses, cfg);
        Ok(Self {
            config: *cfg,
            scene,
            poses,
            frames,
        })
    }
}
