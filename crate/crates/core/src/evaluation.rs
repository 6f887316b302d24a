//! Trajectory error metrics and TUM trajectory files.
//!
//! Trajectories hold camera-to-world poses (the camera position is the
//! translation), matching the TUM text format
//! `timestamp tx ty tz qx qy qz qw`.

use std::io::{BufRead, Write};

use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion, Vector3, SVD};

use crate::error::{Error, Result};
use crate::geometry::Pose;

/// Default frame offset for the relative pose error.
pub const DEFAULT_RPE_DELTA: usize = 1;
/// Default largest timestamp difference for associating two poses, seconds.
pub const DEFAULT_ASSOCIATION_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    entries: Vec<(f64, Pose)>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build from `(timestamp, camera-to-world pose)` pairs; timestamps must
    /// be strictly increasing.
    pub fn from_entries(entries: Vec<(f64, Pose)>) -> Result<Self> {
        let mut t = Self::new();
        for (ts, p) in entries {
            t.push(ts, p)?;
        }
        Ok(t)
    }

    /// Trajectory from world-to-camera poses, inverting each one.
    pub fn from_world_to_camera(timestamps: &[f64], poses: &[Pose]) -> Result<Self> {
        Self::from_entries(timestamps.iter().copied().zip(poses.iter().map(Pose::inverse)).collect())
    }

    pub fn push(&mut self, timestamp: f64, camera_to_world: Pose) -> Result<()> {
        if !timestamp.is_finite() {
            return Err(Error::Config(format!("non-finite timestamp {timestamp}")));
        }
        if let Some((last, _)) = self.entries.last() {
            if timestamp <= *last {
                return Err(Error::Config(format!(
                    "timestamps must increase strictly: {timestamp} after {last}"
                )));
            }
        }
        self.entries.push((timestamp, camera_to_world));
        Ok(())
    }

    pub fn entries(&self) -> &[(f64, Pose)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Copy with every pose premultiplied by `t` (a change of world frame).
    pub fn transformed(&self, t: &Pose) -> Self {
        Self {
            entries: self.entries.iter().map(|(ts, p)| (*ts, t.compose(p))).collect(),
        }
    }
}

/// Pairs `(est, gt)` matched by nearest timestamp within `tolerance`, in
/// order of the estimate.
pub fn associate<'a>(est: &'a Trajectory, gt: &'a Trajectory, tolerance: f64) -> Vec<(&'a Pose, &'a Pose)> {
    let g = gt.entries();
    let mut out = Vec::new();
    if g.is_empty() {
        return out;
    }
    for (ts, pe) in est.entries() {
        let idx = g.partition_point(|(t, _)| t < ts);
        let mut best: Option<(f64, usize)> = None;
        for j in [idx.wrapping_sub(1), idx] {
            if let Some((t, _)) = g.get(j) {
                let d = (t - ts).abs();
                if d <= tolerance && best.map_or(true, |(b, _)| d < b) {
                    best = Some((d, j));
                }
            }
        }
        if let Some((_, j)) = best {
            out.push((pe, &g[j].1));
        }
    }
    out
}

/// Root mean square of the translation norms and rotation angles of
/// `(gt_i⁻¹ gt_{i+δ})⁻¹ (est_i⁻¹ est_{i+δ})` over associated poses.
/// Returns `(meters, radians)`.
pub fn rpe_rmse_with(est: &Trajectory, gt: &Trajectory, delta: usize, tolerance: f64) -> Result<(f64, f64)> {
    if delta == 0 {
        return Err(Error::Config("RPE frame offset must be at least 1".into()));
    }
    let pairs = associate(est, gt, tolerance);
    if pairs.is_empty() {
        return Err(Error::NoAssociation);
    }
    if pairs.len() < delta + 1 {
        return Err(Error::TrajectoryTooShort {
            len: pairs.len(),
            delta,
        });
    }
    let n = pairs.len() - delta;
    let (mut st, mut sr) = (0.0, 0.0);
    for i in 0..n {
        let (e0, g0) = pairs[i];
        let (e1, g1) = pairs[i + delta];
        let rel_gt = g0.inverse().compose(g1);
        let rel_est = e0.inverse().compose(e1);
        let err = rel_gt.inverse().compose(&rel_est);
        st += err.translation.norm_squared();
        sr += err.rotation_angle().powi(2);
    }
    Ok(((st / n as f64).sqrt(), (sr / n as f64).sqrt()))
}

/// [`rpe_rmse_with`] using the default association tolerance.
pub fn rpe_rmse(est: &Trajectory, gt: &Trajectory, delta: usize) -> Result<(f64, f64)> {
    rpe_rmse_with(est, gt, delta, DEFAULT_ASSOCIATION_TOLERANCE)
}

/// Rigid transform `(R, t)` minimizing `Σ ‖R a_i + t − b_i‖²`.
pub fn align_rigid(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> Pose {
    let n = a.len().max(1) as f64;
    let ca: Vector3<f64> = a.iter().sum::<Vector3<f64>>() / n;
    let cb: Vector3<f64> = b.iter().sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    for (x, y) in a.iter().zip(b) {
        cov += (y - cb) * (x - ca).transpose();
    }
    let svd = SVD::new(cov, true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut s = Matrix3::identity();
    if (u * vt).determinant() < 0.0 {
        s[(2, 2)] = -1.0;
    }
    let r = u * s * vt;
    let rotation = Rotation3::from_matrix_unchecked(r);
    Pose::new(rotation, cb - rotation * ca)
}

/// RMSE of camera position differences, optionally after rigid alignment of
/// the estimate onto the ground truth.
pub fn ate_with(est: &Trajectory, gt: &Trajectory, align: bool, tolerance: f64) -> Result<f64> {
    let pairs = associate(est, gt, tolerance);
    if pairs.is_empty() {
        return Err(Error::NoAssociation);
    }
    let a: Vec<Vector3<f64>> = pairs.iter().map(|(e, _)| e.translation).collect();
    let b: Vec<Vector3<f64>> = pairs.iter().map(|(_, g)| g.translation).collect();
    let t = if align { align_rigid(&a, &b) } else { Pose::identity() };
    let sum: f64 = a.iter().zip(&b).map(|(x, y)| (t.transform_point(x) - y).norm_squared()).sum();
    Ok((sum / pairs.len() as f64).sqrt())
}

/// [`ate_with`] using the default association tolerance.
pub fn ate(est: &Trajectory, gt: &Trajectory, align: bool) -> Result<f64> {
    ate_with(est, gt, align, DEFAULT_ASSOCIATION_TOLERANCE)
}

/// Write TUM lines `timestamp tx ty tz qx qy qz qw`.
pub fn write_trajectory<W: Write>(mut out: W, traj: &Trajectory) -> Result<()> {
    for (ts, p) in traj.entries() {
        let t = p.translation;
        let q = p.quaternion();
        writeln!(out, "{} {} {} {} {} {} {} {}", ts, t.x, t.y, t.z, q.i, q.j, q.k, q.w)?;
    }
    Ok(())
}

/// Parse TUM lines; blank lines and `#` comments are skipped.
pub fn read_trajectory<R: BufRead>(input: R, source: &str) -> Result<Trajectory> {
    let mut traj = Trajectory::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: source.to_string(),
            line: idx + 1,
            msg,
        };
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(err(format!("expected 8 fields, got {}", fields.len())));
        }
        let mut v = [0.0; 8];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f.parse().map_err(|e| err(format!("{f:?}: {e}")))?;
        }
        let q = Quaternion::new(v[7], v[4], v[5], v[6]);
        if !(q.norm() > 1e-12) {
            return Err(err("zero quaternion".into()));
        }
        let pose = Pose::from_quaternion(UnitQuaternion::from_quaternion(q), Vector3::new(v[1], v[2], v[3]));
        traj.push(v[0], pose).map_err(|e| err(e.to_string()))?;
    }
    Ok(traj)
}

/// One row of a metrics report.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub label: String,
    pub rpe_trans: f64,
    pub rpe_rot: f64,
    pub ate: f64,
}

pub const METRICS_HEADER: &str = "label,rpe_trans_m,rpe_rot_rad,ate_m";

pub fn write_metrics_csv<W: Write>(mut out: W, rows: &[MetricsRow]) -> Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.label, r.rpe_trans, r.rpe_rot, r.ate)?;
    }
    Ok(())
}
