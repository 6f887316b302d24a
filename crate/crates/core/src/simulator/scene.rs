//! The synthetic house and the circular camera orbit around it.

use nalgebra::{Matrix3, Rotation3, Vector3};

use super::rng::SplitMix64;
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Pose};

/// Number of line segments in the house model.
pub const HOUSE_LINE_COUNT: usize = 25;

/// Half width of the cube walls, meters.
const HALF: f64 = 1.0;
/// Height of the walls.
const WALL: f64 = 2.0;
/// Height of the roof ridge.
const RIDGE: f64 = 2.8;
/// Largest offset of a sampled point from its surface.
const SURFACE_JITTER: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneLine {
    pub id: usize,
    pub start: Vector3<f64>,
    pub end: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenePoint {
    pub id: usize,
    pub position: Vector3<f64>,
}

/// Landmarks of the synthetic world. Line ids are `0..lines.len()`, point ids
/// `0..points.len()`; the two id spaces are separate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimScene {
    pub lines: Vec<SceneLine>,
    pub points: Vec<ScenePoint>,
}

impl SimScene {
    /// Mean of all line endpoints.
    pub fn centroid(&self) -> Vector3<f64> {
        if self.lines.is_empty() {
            return Vector3::zeros();
        }
        let sum: Vector3<f64> = self.lines.iter().map(|l| l.start + l.end).sum();
        sum / (2 * self.lines.len()) as f64
    }
}

/// Circular orbit parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryConfig {
    pub radius: f64,
    pub height: f64,
    pub n_frames: usize,
    /// Time between frames, seconds.
    pub frame_interval: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            radius: 6.0,
            height: 1.0,
            n_frames: 100,
            frame_interval: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub n_points: usize,
    /// Standard deviation of the pixel noise.
    pub noise_sigma: f64,
    /// Intrinsics including the stereo baseline.
    pub intrinsics: CameraIntrinsics,
    pub image: (u32, u32),
    pub trajectory: TrajectoryConfig,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_points: 200,
            noise_sigma: 1.0,
            intrinsics: CameraIntrinsics::default(),
            image: (640, 480),
            trajectory: TrajectoryConfig::default(),
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::Config(format!("noise sigma must be non-negative, got {}", self.noise_sigma)));
        }
        if self.trajectory.n_frames < 2 {
            return Err(Error::Config("at least two frames are required".into()));
        }
        if self.image.0 == 0 || self.image.1 == 0 {
            return Err(Error::Config("image size must be positive".into()));
        }
        if !(self.trajectory.radius > 0.0) {
            return Err(Error::Config("orbit radius must be positive".into()));
        }
        Ok(())
    }

    pub fn image_size(&self) -> (f64, f64) {
        (f64::from(self.image.0), f64::from(self.image.1))
    }
}

fn house_segments() -> Vec<(Vector3<f64>, Vector3<f64>)> {
    let v = Vector3::new;
    let (h, w, r) = (HALF, WALL, RIDGE);
    let corners = [v(-h, -h, 0.0), v(h, -h, 0.0), v(h, h, 0.0), v(-h, h, 0.0)];
    let mut out = Vec::with_capacity(HOUSE_LINE_COUNT);
    for i in 0..4 {
        let a = corners[i];
        let b = corners[(i + 1) % 4];
        let up = v(0.0, 0.0, w);
        out.push((a, b));
        out.push((a + up, b + up));
        out.push((a, a + up));
    }
    let ridge_a = v(-h, 0.0, r);
    let ridge_b = v(h, 0.0, r);
    out.push((ridge_a, ridge_b));
    out.push((ridge_a, v(-h, -h, w)));
    out.push((ridge_a, v(-h, h, w)));
    out.push((ridge_b, v(h, -h, w)));
    out.push((ridge_b, v(h, h, w)));
    // Door on the y = −1 wall.
    out.push((v(-0.3, -h, 0.0), v(-0.3, -h, 1.2)));
    out.push((v(-0.3, -h, 1.2), v(0.3, -h, 1.2)));
    out.push((v(0.3, -h, 1.2), v(0.3, -h, 0.0)));
    // Window with a mullion on the x = +1 wall.
    let (y0, y1, z0, z1) = (-0.5, 0.5, 0.9, 1.6);
    out.push((v(h, y0, z0), v(h, y1, z0)));
    out.push((v(h, y1, z0), v(h, y1, z1)));
    out.push((v(h, y1, z1), v(h, y0, z1)));
    out.push((v(h, y0, z1), v(h, y0, z0)));
    out.push((v(h, 0.0, z0), v(h, 0.0, z1)));
    out
}

/// A point sampled uniformly on the walls and roof, pushed off its surface by
/// up to a few centimeters along the surface normal.
fn sample_surface_point(rng: &mut SplitMix64) -> Vector3<f64> {
    let (h, w, r) = (HALF, WALL, RIDGE);
    let slope = ((r - w).powi(2) + h * h).sqrt();
    let wall_area = 2.0 * h * w;
    let roof_area = 2.0 * h * slope;
    let total = 4.0 * wall_area + 2.0 * roof_area;
    let pick = rng.uniform(0.0, total);
    let a = rng.uniform(-h, h);
    let b = rng.next_f64();
    let jitter = rng.uniform(-SURFACE_JITTER, SURFACE_JITTER);
    if pick < 4.0 * wall_area {
        let face = (pick / wall_area) as usize;
        let z = b * w;
        match face.min(3) {
            0 => Vector3::new(a, -h - jitter, z),
            1 => Vector3::new(h + jitter, a, z),
            2 => Vector3::new(a, h + jitter, z),
            _ => Vector3::new(-h - jitter, a, z),
        }
    } else {
        let sign = if pick < 4.0 * wall_area + roof_area { -1.0 } else { 1.0 };
        let y = sign * h * b;
        let z = r - (r - w) * b;
        let normal = Vector3::new(0.0, sign * (r - w), h) / slope;
        Vector3::new(a, y, z) + jitter * normal
    }
}

/// House of exactly 25 segments (cube, gabled roof, door, window) with
/// `n_points` points sampled on and near its surfaces.
pub fn generate_house_scene(n_points: usize, seed: u64) -> SimScene {
    let lines = house_segments()
        .into_iter()
        .enumerate()
        .map(|(id, (start, end))| SceneLine { id, start, end })
        .collect();
    let mut rng = SplitMix64::stream(seed, 0);
    let points = (0..n_points)
        .map(|id| ScenePoint {
            id,
            position: sample_surface_point(&mut rng),
        })
        .collect();
    SimScene { lines, points }
}

/// World-to-camera pose of a camera at `center` looking horizontally at
/// `target`, image y pointing down.
pub fn look_at(center: &Vector3<f64>, target: &Vector3<f64>) -> Pose {
    let mut forward = target - center;
    forward.z = 0.0;
    let z = forward.normalize();
    let x = z.cross(&Vector3::z()).normalize();
    let y = z.cross(&x);
    let r = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
    let rotation = Rotation3::from_matrix_unchecked(r);
    Pose::new(rotation, -(rotation * center))
}

/// Closed circular orbit at constant distance from `centroid`, one pose per
/// frame at angles `2πk/n`.
pub fn generate_trajectory_around(cfg: &TrajectoryConfig, centroid: &Vector3<f64>) -> Vec<Pose> {
    let n = cfg.n_frames;
    (0..n)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / n as f64;
            let center = Vector3::new(
                centroid.x + cfg.radius * a.cos(),
                centroid.y + cfg.radius * a.sin(),
                cfg.height,
            );
            look_at(&center, centroid)
        })
        .collect()
}

/// Orbit around the house centroid.
pub fn generate_trajectory(cfg: &SimConfig) -> Vec<Pose> {
    let centroid = generate_house_scene(0, cfg.seed).centroid();
    generate_trajectory_around(&cfg.trajectory, &centroid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn house_has_exactly_25_nondegenerate_lines() {
        for seed in [0, 1, 99] {
            let s = generate_house_scene(50, seed);
            assert_eq!(s.lines.len(), HOUSE_LINE_COUNT);
            assert!(s.lines.iter().all(|l| (l.end - l.start).norm() > 0.1));
            assert_eq!(s.points.len(), 50);
        }
        assert!(generate_house_scene(0, 3).points.is_empty());
    }

    #[test]
    fn same_seed_same_scene() {
        assert_eq!(generate_house_scene(100, 5), generate_house_scene(100, 5));
        assert_ne!(generate_house_scene(100, 5), generate_house_scene(100, 6));
    }

    #[test]
    fn points_lie_near_the_house() {
        let s = generate_house_scene(2000, 11);
        for p in &s.points {
            let x = p.position;
            assert!(x.x.abs() <= HALF + SURFACE_JITTER + 1e-12);
            assert!(x.y.abs() <= HALF + SURFACE_JITTER + 1e-12);
            assert!(x.z >= -1e-12 && x.z <= RIDGE + SURFACE_JITTER);
        }
    }

    #[test]
    fn orbit_keeps_constant_distance_and_faces_centroid() {
        let cfg = SimConfig::default();
        let poses = generate_trajectory(&cfg);
        assert_eq!(poses.len(), 100);
        let c = generate_house_scene(0, 0).centroid();
        let d0 = (poses[0].center() - c).norm();
        for p in &poses {
            assert!(((p.center() - c).norm() - d0).abs() < 1e-9);
            let in_cam = p.transform_point(&Vector3::new(c.x, c.y, cfg.trajectory.height));
            assert!(in_cam.x.abs() < 1e-9 && in_cam.y.abs() < 1e-9 && in_cam.z > 0.0);
            assert!(p.orthogonality_error() < 1e-12);
        }
    }

    #[test]
    fn two_frame_trajectory() {
        let mut cfg = SimConfig::default();
        cfg.trajectory.n_frames = 2;
        assert_eq!(generate_trajectory(&cfg).len(), 2);
    }
}
