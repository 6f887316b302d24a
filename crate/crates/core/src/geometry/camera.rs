use nalgebra::{Matrix3, Rotation3, Vector2, Vector3};

use super::line::PlueckerLine;
use super::pose::Pose;
use crate::error::{Error, Result};

/// Rectified stereo pinhole camera. The right camera sits `baseline` metres
/// along the +x axis of the left camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fu: f64,
    pub fv: f64,
    pub cu: f64,
    pub cv: f64,
    pub baseline: f64,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self {
            fu: 500.0,
            fv: 500.0,
            cu: 320.0,
            cv: 240.0,
            baseline: 0.5,
        }
    }
}

/// Which camera of the stereo rig produced an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
}

impl CameraIntrinsics {
    pub fn new(fu: f64, fv: f64, cu: f64, cv: f64, baseline: f64) -> Result<Self> {
        if !(fu > 0.0 && fv > 0.0 && baseline > 0.0) {
            return Err(Error::Config(format!(
                "intrinsics require fu, fv, baseline > 0 (got {fu}, {fv}, {baseline})"
            )));
        }
        Ok(Self {
            fu,
            fv,
            cu,
            cv,
            baseline,
        })
    }

    /// Camera matrix `K` for points.
    pub fn k_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fu, 0.0, self.cu, 0.0, self.fv, self.cv, 0.0, 0.0, 1.0)
    }

    /// Line projection matrix `𝒦` with `l' = 𝒦 n_c`.
    ///
    /// Equals `det(K)·K⁻ᵀ`, the cofactor matrix of `K`, so that an image point
    /// `x = K X_c` lies on `l'` exactly when `X_c` lies on the plane with
    /// normal `n_c` through the camera centre.
    pub fn line_projection_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.fv,
            0.0,
            0.0,
            0.0,
            self.fu,
            0.0,
            -self.fv * self.cu,
            -self.fu * self.cv,
            self.fu * self.fv,
        )
    }

    /// Pose of the given camera relative to the left camera.
    pub fn side_offset(&self, side: Side) -> Pose {
        match side {
            Side::Left => Pose::identity(),
            Side::Right => Pose::new(
                Rotation3::identity(),
                Vector3::new(-self.baseline, 0.0, 0.0),
            ),
        }
    }

    /// World-to-camera transform of `side`, given the left camera pose.
    pub fn side_pose(&self, left: &Pose, side: Side) -> Pose {
        match side {
            Side::Left => *left,
            Side::Right => self.side_offset(side).compose(left),
        }
    }

    /// Pixel of a camera-frame point. No depth check.
    pub fn project(&self, p: &Vector3<f64>) -> Vector2<f64> {
        Vector2::new(
            self.fu * p.x / p.z + self.cu,
            self.fv * p.y / p.z + self.cv,
        )
    }

    /// Unnormalized ray direction through a pixel, in camera coordinates.
    pub fn back_project(&self, pixel: &Vector2<f64>) -> Vector3<f64> {
        Vector3::new(
            (pixel.x - self.cu) / self.fu,
            (pixel.y - self.cv) / self.fv,
            1.0,
        )
    }

    /// Stereo triangulation from left pixel and right-image u coordinate.
    /// Returns `None` for non-positive disparity.
    pub fn triangulate_stereo(&self, left: &Vector2<f64>, u_right: f64) -> Option<Vector3<f64>> {
        let disparity = left.x - u_right;
        if disparity <= 0.0 {
            return None;
        }
        let z = self.fu * self.baseline / disparity;
        Some(self.back_project(left) * z)
    }
}

/// Image line `l' = 𝒦 n_c` of a camera-frame Plücker line. Only the moment
/// enters the projection.
pub fn project_line(k: &CameraIntrinsics, line_c: &PlueckerLine) -> Result<Vector3<f64>> {
    let l = k.line_projection_matrix() * line_c.n;
    if l.x == 0.0 && l.y == 0.0 {
        return Err(Error::LineAtInfinity);
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_intrinsics() {
        let k = CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, 1.0).unwrap();
        let l = PlueckerLine::new_unchecked(Vector3::new(0.0, 1.0, 0.0), Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(project_line(&k, &l).unwrap(), Vector3::new(0.0, 1.0, 0.0));
    }

    #[test]
    fn default_intrinsics_matrix_product() {
        // Symbolic evaluation: column 1 of 𝒦 is (fv, 0, -fv·cu).
        let k = CameraIntrinsics::default();
        let l = PlueckerLine::new_unchecked(Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 1.0, 0.0));
        assert_eq!(project_line(&k, &l).unwrap(), Vector3::new(500.0, 0.0, -160000.0));
    }

    #[test]
    fn projection_ignores_direction() {
        let k = CameraIntrinsics::default();
        let n = Vector3::new(0.3, -0.2, 0.9);
        let a = PlueckerLine::new_unchecked(n, Vector3::new(1.0, 0.0, 0.0));
        let b = PlueckerLine::new_unchecked(n, Vector3::new(-7.0, 2.5, 0.1));
        assert_eq!(project_line(&k, &a).unwrap(), project_line(&k, &b).unwrap());
    }

    #[test]
    fn line_matrix_is_cofactor_of_k() {
        let k = CameraIntrinsics::new(480.0, 510.0, 300.0, 250.0, 0.4).unwrap();
        let km = k.k_matrix();
        let cof = km.determinant() * km.try_inverse().unwrap().transpose();
        assert!((cof - k.line_projection_matrix()).norm() < 1e-6);
    }

    #[test]
    fn line_at_infinity_rejected() {
        let k = CameraIntrinsics::default();
        let l = PlueckerLine::new_unchecked(Vector3::new(0.0, 0.0, 1.0), Vector3::new(1.0, 0.0, 0.0));
        assert!(matches!(project_line(&k, &l), Err(Error::LineAtInfinity)));
    }

    #[test]
    fn invalid_intrinsics_rejected() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 0.0, 0.0, 1.0).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn stereo_triangulation_inverts_projection() {
        let k = CameraIntrinsics::default();
        let p = Vector3::new(0.7, -0.3, 5.0);
        let left = k.project(&p);
        let right = k.project(&k.side_offset(Side::Right).transform_point(&p));
        let back = k.triangulate_stereo(&left, right.x).unwrap();
        assert!((back - p).norm() < 1e-12);
        assert!((left.x - right.x - k.fu * k.baseline / p.z).abs() < 1e-9);
    }
}
