//! Point and line re-projection residuals with their analytic Jacobians.
//!
//! Pose Jacobians are taken with respect to the left-multiplicative increment
//! `δξ = (δρ, δφ)` of the *left* camera pose; observations made by the right
//! camera are chained through the fixed stereo offset. Line Jacobians with
//! respect to the landmark use the 4-vector increment of
//! [`OrthonormalLine`](crate::geometry::OrthonormalLine).

use nalgebra::{Matrix2x3, Matrix2x4, Matrix2x6, Matrix3, Matrix3x6, Matrix6, Matrix6x4, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::frontend::Descriptor;
use crate::geometry::{
    line_motion_matrix, plucker_from_orthonormal, project_line, skew, transform_line, CameraIntrinsics,
    OrthonormalLine, PlueckerLine, Pose, Side,
};

/// Points closer than this to the camera plane are treated as behind it.
pub const MIN_DEPTH: f64 = 1e-4;

/// Observed image segment with homogeneous endpoints `(u, v, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageLineSegment {
    pub xs: Vector3<f64>,
    pub xe: Vector3<f64>,
    pub descriptor: Option<Descriptor>,
}

impl ImageLineSegment {
    pub fn new(start: Vector2<f64>, end: Vector2<f64>) -> Self {
        Self {
            xs: start.push(1.0),
            xe: end.push(1.0),
            descriptor: None,
        }
    }

    pub fn start(&self) -> Vector2<f64> {
        self.xs.xy()
    }

    pub fn end(&self) -> Vector2<f64> {
        self.xe.xy()
    }

    pub fn length(&self) -> f64 {
        (self.end() - self.start()).norm()
    }

    /// Homogeneous image line through both endpoints.
    pub fn image_line(&self) -> Vector3<f64> {
        self.xs.cross(&self.xe)
    }
}

/// Pixel observation of a point. Stereo observations also carry the
/// right-image `u` coordinate (same row after rectification).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointObservation {
    pub pixel: Vector2<f64>,
    pub u_right: Option<f64>,
}

impl PointObservation {
    pub fn mono(pixel: Vector2<f64>) -> Self {
        Self {
            pixel,
            u_right: None,
        }
    }

    pub fn stereo(pixel: Vector2<f64>, u_right: f64) -> Self {
        Self {
            pixel,
            u_right: Some(u_right),
        }
    }

    pub fn dim(&self) -> usize {
        if self.u_right.is_some() {
            3
        } else {
            2
        }
    }
}

/// Signed distances of the two observed endpoints to the image line `l'`.
pub fn line_residual(obs: &ImageLineSegment, l: &Vector3<f64>) -> Result<Vector2<f64>> {
    let ln = l.xy().norm();
    if ln == 0.0 {
        return Err(Error::LineAtInfinity);
    }
    Ok(Vector2::new(obs.xs.dot(l), obs.xe.dot(l)) / ln)
}

/// `∂e/∂l'`, a 2×3 matrix.
pub fn jac_residual_wrt_lprime(obs: &ImageLineSegment, l: &Vector3<f64>) -> Result<Matrix2x3<f64>> {
    let ln2 = l.x * l.x + l.y * l.y;
    if ln2 == 0.0 {
        return Err(Error::LineAtInfinity);
    }
    let ln = ln2.sqrt();
    let e1 = obs.xs.dot(l);
    let e2 = obs.xe.dot(l);
    let (u1, v1) = (obs.xs.x, obs.xs.y);
    let (u2, v2) = (obs.xe.x, obs.xe.y);
    Ok(Matrix2x3::new(
        u1 - l.x * e1 / ln2,
        v1 - l.y * e1 / ln2,
        1.0,
        u2 - l.x * e2 / ln2,
        v2 - l.y * e2 / ln2,
        1.0,
    ) / ln)
}

/// `∂l'/∂L_c = [𝒦 | 0]`.
pub fn jac_lprime_wrt_lc(k: &CameraIntrinsics) -> Matrix3x6<f64> {
    let mut j = Matrix3x6::zeros();
    j.fixed_view_mut::<3, 3>(0, 0).copy_from(&k.line_projection_matrix());
    j
}

/// `∂L_c/∂L_w`, the line motion matrix of `pose`.
pub fn jac_lc_wrt_lw(pose: &Pose) -> Matrix6<f64> {
    line_motion_matrix(pose)
}

/// `∂L_w/∂δθ` at `δθ = 0`:
/// `[[-[w1 u1]×, -w2 u1], [-[w2 u2]×, w1 u2]]`.
pub fn jac_lw_wrt_dtheta(line: &OrthonormalLine) -> Matrix6x4<f64> {
    let (w1, w2) = (line.w1(), line.w2());
    let u1 = line.column(0);
    let u2 = line.column(1);
    let mut j = Matrix6x4::zeros();
    j.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-skew(&(w1 * u1))));
    j.fixed_view_mut::<3, 1>(0, 3).copy_from(&(-w2 * u1));
    j.fixed_view_mut::<3, 3>(3, 0).copy_from(&(-skew(&(w2 * u2))));
    j.fixed_view_mut::<3, 1>(3, 3).copy_from(&(w1 * u2));
    j
}

/// `∂L_c/∂δξ` for the left-multiplicative pose increment.
///
/// Columns 0..3 (translation): `[-[R v]× ; 0]`.
/// Columns 3..6 (rotation): `[-[R n]× - [[t]× R v]× ; -[R v]×]`.
pub fn jac_lc_wrt_dxi(pose: &Pose, line_w: &PlueckerLine) -> Matrix6<f64> {
    let rn = pose.rotation * line_w.n;
    let rv = pose.rotation * line_w.v;
    let trv = pose.translation.cross(&rv);
    let mut j = Matrix6::zeros();
    j.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-skew(&rv)));
    j.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-skew(&rn) - skew(&trv)));
    j.fixed_view_mut::<3, 3>(3, 3).copy_from(&(-skew(&rv)));
    j
}

/// Residual of a line observation seen by `side` of the rig at left pose
/// `pose`.
pub fn line_residual_at(
    obs: &ImageLineSegment,
    pose: &Pose,
    line: &OrthonormalLine,
    k: &CameraIntrinsics,
    side: Side,
) -> Result<Vector2<f64>> {
    let lw = plucker_from_orthonormal(line);
    let lc = transform_line(&k.side_pose(pose, side), &lw);
    line_residual(obs, &project_line(k, &lc)?)
}

/// Residual plus `(J_ξ, J_θ)` of a line observation, chained from the blocks
/// above.
pub fn line_jacobians_side(
    obs: &ImageLineSegment,
    pose: &Pose,
    line: &OrthonormalLine,
    k: &CameraIntrinsics,
    side: Side,
) -> Result<(Vector2<f64>, Matrix2x6<f64>, Matrix2x4<f64>)> {
    let lw = plucker_from_orthonormal(line);
    let cam = k.side_pose(pose, side);
    let lc = transform_line(&cam, &lw);
    let l = project_line(k, &lc)?;
    let e = line_residual(obs, &l)?;
    let de_dl = jac_residual_wrt_lprime(obs, &l)?;
    let de_dlc = de_dl * jac_lprime_wrt_lc(k);
    let (j_xi, j_theta) = match side {
        Side::Left => (
            de_dlc * jac_lc_wrt_dxi(pose, &lw),
            de_dlc * jac_lc_wrt_lw(pose) * jac_lw_wrt_dtheta(line),
        ),
        Side::Right => {
            let offset = line_motion_matrix(&k.side_offset(side));
            (
                de_dlc * offset * jac_lc_wrt_dxi(pose, &lw),
                de_dlc * jac_lc_wrt_lw(&cam) * jac_lw_wrt_dtheta(line),
            )
        }
    };
    Ok((e, j_xi, j_theta))
}

/// `(J_ξ, J_θ)` of a left-camera line observation.
pub fn line_jacobians(
    obs: &ImageLineSegment,
    pose: &Pose,
    line: &OrthonormalLine,
    k: &CameraIntrinsics,
) -> Result<(Matrix2x6<f64>, Matrix2x4<f64>)> {
    line_jacobians_side(obs, pose, line, k, Side::Left).map(|(_, a, b)| (a, b))
}

fn camera_point(pose: &Pose, x_w: &Vector3<f64>) -> Result<Vector3<f64>> {
    let xc = pose.transform_point(x_w);
    if xc.z <= MIN_DEPTH {
        return Err(Error::BehindCamera { depth: xc.z });
    }
    Ok(xc)
}

/// Observed minus predicted pixel for a monocular observation by `side`.
pub fn mono_point_residual(
    pixel: &Vector2<f64>,
    pose: &Pose,
    x_w: &Vector3<f64>,
    k: &CameraIntrinsics,
    side: Side,
) -> Result<Vector2<f64>> {
    let xc = camera_point(&k.side_pose(pose, side), x_w)?;
    Ok(pixel - k.project(&xc))
}

/// Observed minus predicted `(u_l, v_l, u_r)`.
pub fn stereo_point_residual(
    obs: &Vector3<f64>,
    pose: &Pose,
    x_w: &Vector3<f64>,
    k: &CameraIntrinsics,
) -> Result<Vector3<f64>> {
    let xc = camera_point(pose, x_w)?;
    let left = k.project(&xc);
    let u_r = k.fu * (xc.x - k.baseline) / xc.z + k.cu;
    Ok(obs - Vector3::new(left.x, left.y, u_r))
}

/// Point residual of a left-camera observation: 2-vector for monocular, 3-vector
/// `(u, v, u_right)` for stereo.
pub fn point_residual(
    obs: &PointObservation,
    pose: &Pose,
    x_w: &Vector3<f64>,
    k: &CameraIntrinsics,
) -> Result<nalgebra::DVector<f64>> {
    match obs.u_right {
        Some(ur) => stereo_point_residual(&Vector3::new(obs.pixel.x, obs.pixel.y, ur), pose, x_w, k)
            .map(|r| nalgebra::DVector::from_column_slice(r.as_slice())),
        None => mono_point_residual(&obs.pixel, pose, x_w, k, Side::Left)
            .map(|r| nalgebra::DVector::from_column_slice(r.as_slice())),
    }
}

/// Residual and Jacobians `(∂e/∂δξ, ∂e/∂X_w)` of a monocular observation.
pub fn mono_point_jacobians(
    pixel: &Vector2<f64>,
    pose: &Pose,
    x_w: &Vector3<f64>,
    k: &CameraIntrinsics,
    side: Side,
) -> Result<(Vector2<f64>, Matrix2x6<f64>, Matrix2x3<f64>)> {
    let xc = pose.transform_point(x_w);
    let xs = k.side_offset(side).transform_point(&xc);
    if xs.z <= MIN_DEPTH {
        return Err(Error::BehindCamera { depth: xs.z });
    }
    let e = pixel - k.project(&xs);
    let iz = 1.0 / xs.z;
    let dproj = Matrix2x3::new(
        k.fu * iz,
        0.0,
        -k.fu * xs.x * iz * iz,
        0.0,
        k.fv * iz,
        -k.fv * xs.y * iz * iz,
    );
    let (j_xi, j_x) = pixel_jacobians(&dproj, &xc, pose);
    Ok((e, j_xi, j_x))
}

/// Residual and Jacobians of a stereo `(u, v, u_right)` observation.
pub fn stereo_point_jacobians(
    obs: &Vector3<f64>,
    pose: &Pose,
    x_w: &Vector3<f64>,
    k: &CameraIntrinsics,
) -> Result<(Vector3<f64>, Matrix3x6<f64>, Matrix3<f64>)> {
    let xc = camera_point(pose, x_w)?;
    let iz = 1.0 / xc.z;
    let pred = Vector3::new(
        k.fu * xc.x * iz + k.cu,
        k.fv * xc.y * iz + k.cv,
        k.fu * (xc.x - k.baseline) * iz + k.cu,
    );
    let dproj = Matrix3::new(
        k.fu * iz,
        0.0,
        -k.fu * xc.x * iz * iz,
        0.0,
        k.fv * iz,
        -k.fv * xc.y * iz * iz,
        k.fu * iz,
        0.0,
        -k.fu * (xc.x - k.baseline) * iz * iz,
    );
    let mut dxc = Matrix3x6::zeros();
    dxc.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
    dxc.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-skew(&xc)));
    let j_xi = -(dproj * dxc);
    let j_x = -(dproj * pose.rotation.matrix());
    Ok((obs - pred, j_xi, j_x))
}

fn pixel_jacobians(
    dproj: &Matrix2x3<f64>,
    xc: &Vector3<f64>,
    pose: &Pose,
) -> (Matrix2x6<f64>, Matrix2x3<f64>) {
    let mut dxc = Matrix3x6::zeros();
    dxc.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
    dxc.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-skew(xc)));
    (-(dproj * dxc), -(dproj * pose.rotation.matrix()))
}

/// `(∂e/∂δξ, ∂e/∂X_w)` of a left-camera observation, rows as in
/// [`point_residual`].
pub fn point_jacobians(
    obs: &PointObservation,
    pose: &Pose,
    x_w: &Vector3<f64>,
    k: &CameraIntrinsics,
) -> Result<(nalgebra::DMatrix<f64>, nalgebra::DMatrix<f64>)> {
    match obs.u_right {
        Some(ur) => {
            let (_, a, b) = stereo_point_jacobians(&Vector3::new(obs.pixel.x, obs.pixel.y, ur), pose, x_w, k)?;
            Ok((
                nalgebra::DMatrix::from_column_slice(3, 6, a.as_slice()),
                nalgebra::DMatrix::from_column_slice(3, 3, b.as_slice()),
            ))
        }
        None => {
            let (_, a, b) = mono_point_jacobians(&obs.pixel, pose, x_w, k, Side::Left)?;
            Ok((
                nalgebra::DMatrix::from_column_slice(2, 6, a.as_slice()),
                nalgebra::DMatrix::from_column_slice(2, 3, b.as_slice()),
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;

    #[test]
    fn line_residual_hand_example() {
        let obs = ImageLineSegment::new(Vector2::new(3.0, 2.0), Vector2::new(-1.0, -4.0));
        let e = line_residual(&obs, &Vector3::new(0.0, 1.0, 0.0)).unwrap();
        assert_eq!(e, Vector2::new(2.0, -4.0));
    }

    #[test]
    fn line_residual_zero_on_line_and_scale_invariant() {
        let obs = ImageLineSegment::new(Vector2::new(3.0, 0.0), Vector2::new(-1.0, 0.0));
        let l = Vector3::new(0.0, 1.0, 0.0);
        assert_eq!(line_residual(&obs, &l).unwrap(), Vector2::zeros());
        let obs = ImageLineSegment::new(Vector2::new(3.0, 2.0), Vector2::new(-1.0, -4.0));
        let l = Vector3::new(0.3, -1.2, 4.0);
        let a = line_residual(&obs, &l).unwrap();
        let b = line_residual(&obs, &(l * 17.5)).unwrap();
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn line_at_infinity_is_error() {
        let obs = ImageLineSegment::new(Vector2::new(3.0, 2.0), Vector2::new(-1.0, -4.0));
        assert!(line_residual(&obs, &Vector3::new(0.0, 0.0, 1.0)).is_err());
        assert!(jac_residual_wrt_lprime(&obs, &Vector3::new(0.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn residual_jacobian_on_line_reduces_to_endpoints() {
        let obs = ImageLineSegment::new(Vector2::new(3.0, 0.0), Vector2::new(-1.0, 0.0));
        let l = Vector3::new(0.0, 2.0, 0.0);
        let j = jac_residual_wrt_lprime(&obs, &l).unwrap();
        assert_eq!(j.row(0).into_owned(), obs.xs.transpose() / 2.0);
        assert_eq!(j.row(1).into_owned(), obs.xe.transpose() / 2.0);
    }

    #[test]
    fn residual_jacobian_axis_case_finite() {
        let obs = ImageLineSegment::new(Vector2::new(3.0, 5.0), Vector2::new(-1.0, 2.0));
        let j = jac_residual_wrt_lprime(&obs, &Vector3::new(1.0, 0.0, 0.0)).unwrap();
        assert!(j.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn projection_jacobian_structure() {
        let k = CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, 1.0).unwrap();
        let j = jac_lprime_wrt_lc(&k);
        assert_eq!(j.fixed_view::<3, 3>(0, 0).into_owned(), Matrix3::identity());
        assert!(j.fixed_view::<3, 3>(0, 3).iter().all(|&x| x == 0.0));
        let j = jac_lprime_wrt_lc(&CameraIntrinsics::default());
        assert!(j.fixed_view::<3, 3>(0, 3).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn motion_matrix_lower_left_block_is_zero() {
        let pose = Pose::new(Rotation3::new(Vector3::new(0.4, -1.0, 0.2)), Vector3::new(3.0, -2.0, 1.0));
        let h = jac_lc_wrt_lw(&pose);
        assert!(h.fixed_view::<3, 3>(3, 0).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn pose_jacobian_identity_origin_line() {
        let l = PlueckerLine::new_unchecked(Vector3::zeros(), Vector3::new(1.0, 0.0, 0.0));
        let j = jac_lc_wrt_dxi(&Pose::identity(), &l);
        assert_eq!(j.fixed_view::<3, 3>(0, 0).into_owned(), -skew(&l.v));
        assert!(j.fixed_view::<3, 3>(3, 0).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn theta_jacobian_last_column() {
        let l = PlueckerLine::from_endpoints(&Vector3::new(1.0, 2.0, 3.0), &Vector3::new(-1.0, 0.0, 2.0)).unwrap();
        let o = crate::geometry::orthonormal_from_plucker(&l).unwrap();
        let j = jac_lw_wrt_dtheta(&o);
        let col = j.column(3).into_owned();
        let expect_top = -o.w2() * o.column(0);
        let expect_bot = o.w1() * o.column(1);
        assert_eq!(col.fixed_rows::<3>(0).into_owned(), expect_top);
        assert_eq!(col.fixed_rows::<3>(3).into_owned(), expect_bot);
    }

    #[test]
    fn point_residual_hand_examples() {
        let k1 = CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, 1.0).unwrap();
        let r = point_residual(&PointObservation::mono(Vector2::zeros()), &Pose::identity(), &Vector3::new(0.0, 0.0, 1.0), &k1)
            .unwrap();
        assert_eq!(r.as_slice(), &[0.0, 0.0]);

        let k = CameraIntrinsics::default();
        let r = point_residual(
            &PointObservation::mono(Vector2::new(575.0, 240.0)),
            &Pose::identity(),
            &Vector3::new(1.0, 0.0, 2.0),
            &k,
        )
        .unwrap();
        assert_eq!(r.as_slice(), &[5.0, 0.0]);
    }

    #[test]
    fn point_behind_camera_is_error() {
        let k = CameraIntrinsics::default();
        let obs = PointObservation::stereo(Vector2::new(320.0, 240.0), 300.0);
        assert!(matches!(
            point_residual(&obs, &Pose::identity(), &Vector3::new(0.0, 0.0, -1.0), &k),
            Err(Error::BehindCamera { .. })
        ));
        assert!(point_jacobians(&obs, &Pose::identity(), &Vector3::new(0.0, 0.0, -1.0), &k).is_err());
    }

    #[test]
    fn identity_pose_axis_point_jacobian() {
        let k = CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, 1.0).unwrap();
        let (jxi, jx) = point_jacobians(
            &PointObservation::mono(Vector2::zeros()),
            &Pose::identity(),
            &Vector3::new(0.0, 0.0, 1.0),
            &k,
        )
        .unwrap();
        // Predicted pixel moves with x and y; the residual moves opposite.
        assert_eq!(jx[(0, 0)], -1.0);
        assert_eq!(jx[(1, 1)], -1.0);
        assert_eq!(jx[(0, 2)], 0.0);
        assert_eq!(jxi[(0, 0)], -1.0);
        // Rotation about y moves the axis point toward +x.
        assert_eq!(jxi[(0, 4)], -1.0);
    }
}
