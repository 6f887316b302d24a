//! Finite-difference verification of the analytic Jacobians on random
//! well-conditioned configurations.

use std::fmt;

use nalgebra::{DMatrix, Rotation3, Vector2, Vector3, Vector4, Vector6};

use crate::geometry::{
    orthonormal_from_plucker, plucker_from_orthonormal, project_line, transform_line, CameraIntrinsics, LineUpdate,
    OrthonormalLine, PlueckerLine, Pose, PoseUpdate, Side,
};
use crate::measurement::{
    jac_lc_wrt_dxi, jac_lc_wrt_lw, jac_lprime_wrt_lc, jac_lw_wrt_dtheta, jac_residual_wrt_lprime, line_jacobians_side,
    line_residual, line_residual_at, mono_point_jacobians, mono_point_residual, stereo_point_jacobians,
    stereo_point_residual, ImageLineSegment,
};
use crate::simulator::SplitMix64;

/// Central-difference step.
const STEP: f64 = 1e-6;

/// Deliberate corruption of one analytic block, used to confirm the check
/// can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Negate the rotational part of the line pose Jacobian.
    LinePoseRotationSign,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockResult {
    pub name: &'static str,
    pub max_relative_error: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobianReport {
    pub trials: usize,
    pub tolerance: f64,
    pub blocks: Vec<BlockResult>,
}

impl JacobianReport {
    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.failures == 0)
    }
}

impl fmt::Display for JacobianReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "block,max_relative_error,failures,trials")?;
        for b in &self.blocks {
            writeln!(f, "{},{:.3e},{},{}", b.name, b.max_relative_error, b.failures, self.trials)?;
        }
        Ok(())
    }
}

/// Relative Frobenius error `‖A − B‖ / max(‖B‖, 1e-8)`.
pub fn relative_error(analytic: &DMatrix<f64>, numeric: &DMatrix<f64>) -> f64 {
    (analytic - numeric).norm() / numeric.norm().max(1e-8)
}

/// Central differences of `f` around zero in each of `dim` directions.
pub fn numeric_jacobian(dim: usize, rows: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(rows, dim);
    let mut x = vec![0.0; dim];
    for c in 0..dim {
        x[c] = STEP;
        let plus = f(&x);
        x[c] = -STEP;
        let minus = f(&x);
        x[c] = 0.0;
        for r in 0..rows {
            j[(r, c)] = (plus[r] - minus[r]) / (2.0 * STEP);
        }
    }
    j
}

/// A random configuration: camera pose, a world line in front of the camera
/// with both endpoints visible, an observed segment a few pixels off the
/// projection, and a point with its stereo observation.
#[derive(Debug, Clone)]
pub struct Configuration {
    pub k: CameraIntrinsics,
    pub pose: Pose,
    pub line: OrthonormalLine,
    pub segment: ImageLineSegment,
    pub side: Side,
    pub point: Vector3<f64>,
    pub stereo_obs: Vector3<f64>,
}

fn random_unit(rng: &mut SplitMix64) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.gaussian(), rng.gaussian(), rng.gaussian());
        if v.norm() > 1e-3 {
            return v.normalize();
        }
    }
}

fn in_view(rng: &mut SplitMix64) -> Vector3<f64> {
    let z = rng.uniform(2.0, 10.0);
    Vector3::new(rng.uniform(-0.4, 0.4) * z, rng.uniform(-0.3, 0.3) * z, z)
}

impl Configuration {
    pub fn random(rng: &mut SplitMix64) -> Self {
        let k = CameraIntrinsics::default();
        let rotation = Rotation3::new(random_unit(rng) * rng.uniform(0.0, std::f64::consts::PI));
        let translation = Vector3::new(rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0));
        let pose = Pose::new(rotation, translation);
        let to_world = pose.inverse();
        let side = if rng.next_f64() < 0.5 { Side::Left } else { Side::Right };
        loop {
            let a = in_view(rng);
            let b = in_view(rng);
            let pa = k.project(&a);
            let pb = k.project(&b);
            // Keep segments long enough in the image and away from the
            // camera center so the line is well conditioned.
            if (pa - pb).norm() < 40.0 {
                continue;
            }
            let lw = match PlueckerLine::from_endpoints(&to_world.transform_point(&a), &to_world.transform_point(&b)) {
                Ok(l) => l,
                Err(_) => continue,
            };
            let Ok(line) = orthonormal_from_plucker(&lw) else { continue };
            let cam = k.side_pose(&pose, side);
            let (ca, cb) = (cam.transform_point(&to_world.transform_point(&a)), cam.transform_point(&to_world.transform_point(&b)));
            if ca.z < 0.5 || cb.z < 0.5 {
                continue;
            }
            let mut noisy = |p: Vector2<f64>| p + Vector2::new(rng.normal(2.0), rng.normal(2.0));
            let segment = ImageLineSegment::new(noisy(k.project(&ca)), noisy(k.project(&cb)));
            let xc = in_view(rng);
            let point = to_world.transform_point(&xc);
            let u_r = k.fu * (xc.x - k.baseline) / xc.z + k.cu;
            let left = k.project(&xc);
            let stereo_obs = Vector3::new(left.x + rng.normal(1.0), left.y + rng.normal(1.0), u_r + rng.normal(1.0));
            return Self {
                k,
                pose,
                line,
                segment,
                side,
                point,
                stereo_obs,
            };
        }
    }
}

fn to_dmatrix<const R: usize, const C: usize>(m: &nalgebra::SMatrix<f64, R, C>) -> DMatrix<f64> {
    DMatrix::from_column_slice(R, C, m.as_slice())
}

fn pose_step(x: &[f64]) -> PoseUpdate {
    PoseUpdate(Vector6::from_column_slice(x))
}

/// Relative errors of every analytic block for one configuration, in the
/// order of [`BLOCK_NAMES`].
pub fn block_errors(c: &Configuration, fault: Option<Fault>) -> Vec<f64> {
    let k = &c.k;
    let lw = plucker_from_orthonormal(&c.line);
    let lc = transform_line(&c.pose, &lw);
    let l = project_line(k, &lc).expect("visible line");

    let de_dl = numeric_jacobian(3, 2, |x| {
        let lp = l + Vector3::from_column_slice(x);
        line_residual(&c.segment, &lp).unwrap().as_slice().to_vec()
    });
    let dl_dlc = numeric_jacobian(6, 3, |x| {
        let v = lc.to_vector() + Vector6::from_column_slice(x);
        (k.line_projection_matrix() * v.fixed_rows::<3>(0)).as_slice().to_vec()
    });
    let dlc_dlw = numeric_jacobian(6, 6, |x| {
        let v = lw.to_vector() + Vector6::from_column_slice(x);
        transform_line(&c.pose, &PlueckerLine::from_vector(&v)).to_vector().as_slice().to_vec()
    });
    let dlw_dtheta = numeric_jacobian(4, 6, |x| {
        let o = c.line.update(&LineUpdate(Vector4::from_column_slice(x)));
        plucker_from_orthonormal(&o).to_vector().as_slice().to_vec()
    });
    let dlc_dxi = numeric_jacobian(6, 6, |x| {
        transform_line(&c.pose.update(&pose_step(x)), &lw).to_vector().as_slice().to_vec()
    });

    let (_, mut j_xi, j_theta) = line_jacobians_side(&c.segment, &c.pose, &c.line, k, c.side).unwrap();
    if fault == Some(Fault::LinePoseRotationSign) {
        for r in 0..2 {
            for col in 3..6 {
                j_xi[(r, col)] = -j_xi[(r, col)];
            }
        }
    }
    let line_xi = numeric_jacobian(6, 2, |x| {
        line_residual_at(&c.segment, &c.pose.update(&pose_step(x)), &c.line, k, c.side)
            .unwrap()
            .as_slice()
            .to_vec()
    });
    let line_theta = numeric_jacobian(4, 2, |x| {
        let o = c.line.update(&LineUpdate(Vector4::from_column_slice(x)));
        line_residual_at(&c.segment, &c.pose, &o, k, c.side).unwrap().as_slice().to_vec()
    });

    let px = c.stereo_obs.xy();
    let (_, mp_xi, mp_x) = mono_point_jacobians(&px, &c.pose, &c.point, k, Side::Left).unwrap();
    let mono_xi = numeric_jacobian(6, 2, |x| {
        mono_point_residual(&px, &c.pose.update(&pose_step(x)), &c.point, k, Side::Left)
            .unwrap()
            .as_slice()
            .to_vec()
    });
    let mono_x = numeric_jacobian(3, 2, |x| {
        mono_point_residual(&px, &c.pose, &(c.point + Vector3::from_column_slice(x)), k, Side::Left)
            .unwrap()
            .as_slice()
            .to_vec()
    });
    let (_, sp_xi, sp_x) = stereo_point_jacobians(&c.stereo_obs, &c.pose, &c.point, k).unwrap();
    let stereo_xi = numeric_jacobian(6, 3, |x| {
        stereo_point_residual(&c.stereo_obs, &c.pose.update(&pose_step(x)), &c.point, k)
            .unwrap()
            .as_slice()
            .to_vec()
    });
    let stereo_x = numeric_jacobian(3, 3, |x| {
        stereo_point_residual(&c.stereo_obs, &c.pose, &(c.point + Vector3::from_column_slice(x)), k)
            .unwrap()
            .as_slice()
            .to_vec()
    });

    vec![
        relative_error(&to_dmatrix(&jac_residual_wrt_lprime(&c.segment, &l).unwrap()), &de_dl),
        relative_error(&to_dmatrix(&jac_lprime_wrt_lc(k)), &dl_dlc),
        relative_error(&to_dmatrix(&jac_lc_wrt_lw(&c.pose)), &dlc_dlw),
        relative_error(&to_dmatrix(&jac_lw_wrt_dtheta(&c.line)), &dlw_dtheta),
        relative_error(&to_dmatrix(&jac_lc_wrt_dxi(&c.pose, &lw)), &dlc_dxi),
        relative_error(&to_dmatrix(&j_xi), &line_xi),
        relative_error(&to_dmatrix(&j_theta), &line_theta),
        relative_error(&to_dmatrix(&mp_xi), &mono_xi),
        relative_error(&to_dmatrix(&mp_x), &mono_x),
        relative_error(&to_dmatrix(&sp_xi), &stereo_xi),
        relative_error(&to_dmatrix(&sp_x), &stereo_x),
    ]
}

pub const BLOCK_NAMES: [&str; 11] = [
    "residual_wrt_image_line",
    "image_line_wrt_camera_line",
    "camera_line_wrt_world_line",
    "world_line_wrt_orthonormal",
    "camera_line_wrt_pose",
    "line_residual_wrt_pose",
    "line_residual_wrt_orthonormal",
    "mono_point_wrt_pose",
    "mono_point_wrt_position",
    "stereo_point_wrt_pose",
    "stereo_point_wrt_position",
];

/// Compare every analytic block with central differences on `trials` random
/// configurations drawn from `seed`.
pub fn check_jacobians(trials: usize, seed: u64, tolerance: f64, fault: Option<Fault>) -> JacobianReport {
    let mut rng = SplitMix64::new(seed);
    let mut blocks: Vec<BlockResult> = BLOCK_NAMES
        .iter()
        .map(|name| BlockResult {
            name,
            max_relative_error: 0.0,
            failures: 0,
        })
        .collect();
    for _ in 0..trials {
        let c = Configuration::random(&mut rng);
        for (b, e) in blocks.iter_mut().zip(block_errors(&c, fault)) {
            b.max_relative_error = b.max_relative_error.max(e);
            if !(e < tolerance) {
                b.failures += 1;
            }
        }
    }
    JacobianReport {
        trials,
        tolerance,
        blocks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_blocks_pass() {
        let r = check_jacobians(50, 3, 1e-5, None);
        assert!(r.passed(), "{r}");
    }

    #[test]
    fn injected_sign_error_is_caught() {
        let r = check_jacobians(20, 3, 1e-5, Some(Fault::LinePoseRotationSign));
        assert!(!r.passed());
    }
}
