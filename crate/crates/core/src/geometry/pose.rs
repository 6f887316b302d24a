use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3, Vector6};

/// Skew-symmetric matrix `[a]×` such that `[a]× b = a × b`.
#[inline]
pub fn skew(a: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

/// Left Jacobian of SO(3), used to map the translational tangent part of an
/// SE(3) increment.
pub fn so3_left_jacobian(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = phi.norm_squared();
    let k = skew(phi);
    if theta2 < 1e-10 {
        return Matrix3::identity() + 0.5 * k + (1.0 / 6.0) * k * k;
    }
    let theta = theta2.sqrt();
    Matrix3::identity()
        + ((1.0 - theta.cos()) / theta2) * k
        + ((theta - theta.sin()) / (theta2 * theta)) * k * k
}

/// SE(3) tangent increment `δξ = (δρ, δφ)`.
///
/// The translation part `δρ` occupies components 0..3 and the rotation part
/// `δφ` components 3..6. Every Jacobian with respect to a pose in this crate
/// uses the same column order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseUpdate(pub Vector6<f64>);

impl PoseUpdate {
    pub fn new(rho: Vector3<f64>, phi: Vector3<f64>) -> Self {
        Self(Vector6::new(rho.x, rho.y, rho.z, phi.x, phi.y, phi.z))
    }

    pub fn zero() -> Self {
        Self(Vector6::zeros())
    }

    pub fn rho(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(0).into_owned()
    }

    pub fn phi(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(3).into_owned()
    }

    /// Exponential map to SE(3).
    pub fn exp(&self) -> Pose {
        let phi = self.phi();
        Pose {
            rotation: Rotation3::new(phi),
            translation: so3_left_jacobian(&phi) * self.rho(),
        }
    }
}

/// Rigid transform from world to camera coordinates: `X_c = R X_w + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Rotation3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Rotation3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_quaternion(q: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: q.to_rotation_matrix(),
            translation,
        }
    }

    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_rotation_matrix(&self.rotation)
    }

    pub fn rotation_matrix(&self) -> &Matrix3<f64> {
        self.rotation.matrix()
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Pose {
        let r_inv = self.rotation.inverse();
        Pose {
            rotation: r_inv,
            translation: -(r_inv * self.translation),
        }
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Camera centre in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.inverse() * self.translation)
    }

    /// Left-multiplicative update `Exp(δξ^) · T`.
    pub fn update(&self, delta: &PoseUpdate) -> Pose {
        let mut out = delta.exp().compose(self);
        out.rotation.renormalize();
        out
    }

    /// Logarithm map, the inverse of [`PoseUpdate::exp`].
    pub fn log(&self) -> PoseUpdate {
        let phi = self.rotation_vector();
        let jl = so3_left_jacobian(&phi);
        let rho = jl
            .try_inverse()
            .map(|inv| inv * self.translation)
            .unwrap_or(self.translation);
        PoseUpdate::new(rho, phi)
    }

    /// Rotation angle of this transform, radians in `[0, π]`.
    ///
    /// Computed as `atan2(sin θ, cos θ)` from the skew part and the trace,
    /// which stays accurate for angles near zero.
    pub fn rotation_angle(&self) -> f64 {
        let r = self.rotation.matrix();
        let s = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]).norm() / 2.0;
        let c = (r.trace() - 1.0) / 2.0;
        s.atan2(c)
    }

    /// Axis times angle of the rotation, finite even when round-off pushes
    /// the trace slightly past 3.
    pub fn rotation_vector(&self) -> Vector3<f64> {
        let r = self.rotation.matrix();
        let w = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]) / 2.0;
        let theta = self.rotation_angle();
        if theta < 1e-8 {
            w
        } else if std::f64::consts::PI - theta > 1e-6 {
            w * (theta / theta.sin())
        } else {
            self.rotation.axis().map_or_else(Vector3::zeros, |a| a.into_inner() * theta)
        }
    }

    /// Frobenius norm of `RᵀR − I`.
    pub fn orthogonality_error(&self) -> f64 {
        let r = self.rotation.matrix();
        (r.transpose() * r - Matrix3::identity()).norm()
    }
}

pub fn pose_update(pose: &Pose, delta: &PoseUpdate) -> Pose {
    pose.update(delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_of_round_off_identity_is_finite() {
        let a = Pose::new(Rotation3::new(Vector3::new(0.3, -1.2, 2.0)), Vector3::new(0.1, 1.0, 6.0));
        let e = a.compose(&a.inverse()).log();
        assert!(e.0.iter().all(|x| x.is_finite()) && e.0.norm() < 1e-12);
    }

    #[test]
    fn rotation_vector_matches_angle_axis() {
        for v in [Vector3::new(0.1, -0.4, 0.3), Vector3::new(0.0, 3.0, 0.0), Vector3::new(1e-10, 0.0, 0.0)] {
            let p = Pose::new(Rotation3::new(v), Vector3::zeros());
            assert!((p.rotation_vector() - v).norm() < 1e-9);
        }
    }

    #[test]
    fn zero_update_is_identity() {
        let pose = Pose::new(
            Rotation3::new(Vector3::new(0.1, -0.4, 0.3)),
            Vector3::new(1.0, 2.0, -3.0),
        );
        let out = pose.update(&PoseUpdate::zero());
        assert!((out.rotation.matrix() - pose.rotation.matrix()).norm() < 1e-15);
        assert_eq!(out.translation, pose.translation);
    }

    #[test]
    fn pure_translation_adds_rho() {
        let pose = Pose::new(
            Rotation3::new(Vector3::new(0.3, 0.2, -0.1)),
            Vector3::new(0.5, -1.0, 2.0),
        );
        let rho = Vector3::new(0.25, -0.5, 0.125);
        let out = pose.update(&PoseUpdate::new(rho, Vector3::zeros()));
        assert!((out.rotation.matrix() - pose.rotation.matrix()).norm() < 1e-15);
        assert!((out.translation - (pose.translation + rho)).norm() < 1e-15);
    }

    #[test]
    fn small_rotation_is_first_order_skew() {
        let pose = Pose::new(
            Rotation3::new(Vector3::new(-0.2, 0.7, 0.1)),
            Vector3::new(0.1, 0.2, 0.3),
        );
        let phi = Vector3::new(1e-5, -2e-5, 3e-5);
        let out = pose.update(&PoseUpdate::new(Vector3::zeros(), phi));
        let approx = (Matrix3::identity() + skew(&phi)) * pose.rotation.matrix();
        assert!((out.rotation.matrix() - approx).norm() < 1e-9);
        let t_approx = (Matrix3::identity() + skew(&phi)) * pose.translation;
        assert!((out.translation - t_approx).norm() < 1e-9);
    }

    #[test]
    fn exp_log_round_trip() {
        let d = PoseUpdate(Vector6::new(0.3, -0.2, 1.5, 0.4, -0.9, 0.2));
        let back = d.exp().log();
        assert!((back.0 - d.0).norm() < 1e-12);
    }

    #[test]
    fn inverse_composes_to_identity() {
        let pose = Pose::new(
            Rotation3::new(Vector3::new(0.5, 0.1, -0.3)),
            Vector3::new(-1.0, 4.0, 0.5),
        );
        let id = pose.compose(&pose.inverse());
        assert!(id.rotation.angle() < 1e-15);
        assert!(id.translation.norm() < 1e-14);
    }
}
