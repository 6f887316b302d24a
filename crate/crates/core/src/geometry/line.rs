use nalgebra::{Matrix3, Matrix6, Rotation3, Vector2, Vector3, Vector4, Vector6};

use super::pose::{skew, Pose};
use crate::error::{Error, Result};

/// Infinite 3D line in Plücker coordinates.
///
/// `v` is the direction and `n` the moment, with `n = p × v` for any point
/// `p` on the line. Lines are projective: `(n, v)` and `s·(n, v)` for `s ≠ 0`
/// describe the same line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlueckerLine {
    pub n: Vector3<f64>,
    pub v: Vector3<f64>,
}

impl PlueckerLine {
    /// Checked constructor: rejects the zero vector and violations of the
    /// Klein constraint `n·v = 0` (relative tolerance 1e-9).
    pub fn new(n: Vector3<f64>, v: Vector3<f64>) -> Result<Self> {
        let scale = n.norm() * v.norm();
        if n.norm_squared() + v.norm_squared() == 0.0 {
            return Err(Error::DegenerateLine("(n, v) = 0"));
        }
        if n.dot(&v).abs() > 1e-9 * scale.max(f64::MIN_POSITIVE) && scale > 0.0 {
            return Err(Error::DegenerateLine("n · v != 0"));
        }
        Ok(Self { n, v })
    }

    pub fn new_unchecked(n: Vector3<f64>, v: Vector3<f64>) -> Self {
        Self { n, v }
    }

    /// Line through two inhomogeneous points, oriented from `p` to `q`.
    pub fn from_endpoints(p: &Vector3<f64>, q: &Vector3<f64>) -> Result<Self> {
        plucker_from_points(&p.push(1.0), &q.push(1.0))
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(self.n.x, self.n.y, self.n.z, self.v.x, self.v.y, self.v.z)
    }

    pub fn from_vector(x: &Vector6<f64>) -> Self {
        Self {
            n: x.fixed_rows::<3>(0).into_owned(),
            v: x.fixed_rows::<3>(3).into_owned(),
        }
    }

    /// Unit `‖(n, v)‖` with the largest-magnitude component of `v` positive
    /// (of `n` when `v = 0`).
    pub fn normalized(&self) -> Self {
        let x = self.to_vector();
        let norm = x.norm();
        if norm == 0.0 {
            return *self;
        }
        let reference = if self.v.norm_squared() > 0.0 {
            self.v
        } else {
            self.n
        };
        let idx = reference.iamax();
        let sign = if reference[idx] < 0.0 { -1.0 } else { 1.0 };
        Self::from_vector(&(x * (sign / norm)))
    }

    /// Distance between the unit-normalized coordinate vectors, minimized over
    /// the sign ambiguity. Zero iff both describe the same projective line.
    pub fn projective_distance(&self, other: &PlueckerLine) -> f64 {
        let a = self.to_vector().normalize();
        let b = other.to_vector().normalize();
        (a - b).norm().min((a + b).norm())
    }

    /// Closest point on the line to the origin, `v × n / ‖v‖²`.
    pub fn closest_point_to_origin(&self) -> Vector3<f64> {
        self.v.cross(&self.n) / self.v.norm_squared()
    }

    /// Distance of the line from the origin, `‖n‖ / ‖v‖`.
    pub fn distance_to_origin(&self) -> f64 {
        self.n.norm() / self.v.norm()
    }

    pub fn contains_point(&self, p: &Vector3<f64>, tol: f64) -> bool {
        let scale = self.v.norm();
        (p.cross(&self.v) - self.n).norm() <= tol * scale
    }
}

/// Plücker line through two homogeneous points `X = (x, y, z, r)`.
///
/// Returns `n = X̃1 × X̃2`, `v = r1·X̃2 − r2·X̃1`, i.e. the direction points from
/// the first point toward the second and `n = p × v`. The result is scaled
/// to unit `‖(n, v)‖` by a positive factor, so that orientation is kept.
pub fn plucker_from_points(x1: &Vector4<f64>, x2: &Vector4<f64>) -> Result<PlueckerLine> {
    let a = x1.xyz();
    let b = x2.xyz();
    let (r1, r2) = (x1.w, x2.w);
    let n = a.cross(&b);
    let v = r1 * b - r2 * a;
    if v.norm_squared() == 0.0 {
        return Err(Error::DegenerateLine("coincident points"));
    }
    let s = (n.norm_squared() + v.norm_squared()).sqrt();
    Ok(PlueckerLine { n: n / s, v: v / s })
}

/// Minimal 4-DoF line parameterization `(U, W) ∈ SO(3) × SO(2)`.
///
/// `W` is stored as its first column `(w1, w2) = (cos, sin)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrthonormalLine {
    pub u: Rotation3<f64>,
    pub w: Vector2<f64>,
}

/// Tangent increment of an [`OrthonormalLine`]: three components rotate `U`,
/// the fourth rotates `W`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineUpdate(pub Vector4<f64>);

impl LineUpdate {
    pub fn new(theta: Vector3<f64>, angle: f64) -> Self {
        Self(Vector4::new(theta.x, theta.y, theta.z, angle))
    }

    pub fn zero() -> Self {
        Self(Vector4::zeros())
    }

    pub fn theta(&self) -> Vector3<f64> {
        self.0.xyz()
    }

    pub fn angle(&self) -> f64 {
        self.0.w
    }
}

impl OrthonormalLine {
    pub fn w1(&self) -> f64 {
        self.w.x
    }

    pub fn w2(&self) -> f64 {
        self.w.y
    }

    /// i-th column of `U` (0-based).
    pub fn column(&self, i: usize) -> Vector3<f64> {
        self.u.matrix().column(i).into_owned()
    }

    pub fn w_matrix(&self) -> nalgebra::Matrix2<f64> {
        nalgebra::Matrix2::new(self.w.x, -self.w.y, self.w.y, self.w.x)
    }

    pub fn to_plucker(&self) -> PlueckerLine {
        plucker_from_orthonormal(self)
    }

    pub fn update(&self, delta: &LineUpdate) -> OrthonormalLine {
        update_orthonormal(self, delta)
    }

    /// `‖UᵀU − I‖` and `|w1² + w2² − 1|`, both expected below 1e-12.
    pub fn invariant_errors(&self) -> (f64, f64) {
        let m = self.u.matrix();
        (
            (m.transpose() * m - Matrix3::identity()).norm(),
            (self.w.norm_squared() - 1.0).abs(),
        )
    }
}

fn any_orthogonal_unit(a: &Vector3<f64>) -> Vector3<f64> {
    let axis = match a.iamin() {
        0 => Vector3::x(),
        1 => Vector3::y(),
        _ => Vector3::z(),
    };
    a.cross(&axis).normalize()
}

/// Factor a Plücker line into `U = [n/‖n‖, v/‖v‖, n×v/‖n×v‖]` and
/// `(w1, w2) = (‖n‖, ‖v‖) / ‖(n, v)‖`.
///
/// A zero moment (line through the origin) takes any unit vector orthogonal
/// to `v` as the first column and sets `w1 = 0`; a zero direction is handled
/// symmetrically with `w2 = 0`.
pub fn orthonormal_from_plucker(line: &PlueckerLine) -> Result<OrthonormalLine> {
    let nn = line.n.norm();
    let vn = line.v.norm();
    if nn == 0.0 && vn == 0.0 {
        return Err(Error::DegenerateLine("(n, v) = 0"));
    }
    let (u1, u2) = if nn == 0.0 {
        let u2 = line.v / vn;
        (any_orthogonal_unit(&u2), u2)
    } else if vn == 0.0 {
        let u1 = line.n / nn;
        (u1, any_orthogonal_unit(&u1))
    } else {
        let u1 = line.n / nn;
        // Re-orthogonalize against rounding in n·v.
        let u2 = (line.v - u1 * u1.dot(&line.v)).normalize();
        (u1, u2)
    };
    let u3 = u1.cross(&u2);
    let u = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[u1, u2, u3]));
    let s = (nn * nn + vn * vn).sqrt();
    Ok(OrthonormalLine {
        u,
        w: Vector2::new(nn / s, vn / s),
    })
}

/// `n = w1·u1`, `v = w2·u2`. The result has unit norm; `w2 = 0` gives a line
/// at infinity which downstream projection rejects.
pub fn plucker_from_orthonormal(line: &OrthonormalLine) -> PlueckerLine {
    PlueckerLine {
        n: line.w1() * line.column(0),
        v: line.w2() * line.column(1),
    }
}

/// `U ← Exp([θ]×)·U`, `W ← W·Rot2(θ₄)`, followed by projection of `U` back onto
/// SO(3) and renormalization of `(w1, w2)`.
pub fn update_orthonormal(line: &OrthonormalLine, delta: &LineUpdate) -> OrthonormalLine {
    let mut u = Rotation3::new(delta.theta()) * line.u;
    u.renormalize();
    let (s, c) = delta.angle().sin_cos();
    let w = Vector2::new(
        line.w.x * c - line.w.y * s,
        line.w.x * s + line.w.y * c,
    );
    OrthonormalLine {
        u,
        w: w / w.norm(),
    }
}

/// Line motion matrix `H = [[R, [t]×R], [0, R]]` mapping world Plücker
/// coordinates into the frame of `pose`.
pub fn line_motion_matrix(pose: &Pose) -> Matrix6<f64> {
    let r = *pose.rotation.matrix();
    let tr = skew(&pose.translation) * r;
    let mut h = Matrix6::zeros();
    h.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    h.fixed_view_mut::<3, 3>(0, 3).copy_from(&tr);
    h.fixed_view_mut::<3, 3>(3, 3).copy_from(&r);
    h
}

/// `n_c = R n_w + [t]× R v_w`, `v_c = R v_w` (no normalization).
pub fn transform_line(pose: &Pose, line: &PlueckerLine) -> PlueckerLine {
    let rv = pose.rotation * line.v;
    PlueckerLine {
        n: pose.rotation * line.n + pose.translation.cross(&rv),
        v: rv,
    }
}
