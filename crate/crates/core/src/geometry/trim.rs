use nalgebra::{Vector2, Vector3};

use super::camera::{project_line, CameraIntrinsics};
use super::line::{transform_line, PlueckerLine};
use super::pose::Pose;
use crate::error::{Error, Result};
use crate::measurement::ImageLineSegment;

/// Minimum angle between a back-projected ray and the 3D line, radians.
pub const MIN_RAY_LINE_ANGLE: f64 = 1e-6;

/// Point on `line_w` closest to the viewing ray through `pixel`.
pub fn closest_point_on_line_to_ray(
    line_w: &PlueckerLine,
    pixel: &Vector2<f64>,
    pose: &Pose,
    k: &CameraIntrinsics,
) -> Result<Vector3<f64>> {
    let origin = pose.center();
    let ray = (pose.rotation.inverse() * k.back_project(pixel)).normalize();
    let dir = line_w.v.normalize();
    let p0 = line_w.closest_point_to_origin();

    let ab = dir.dot(&ray);
    let den = 1.0 - ab * ab;
    if den.max(0.0).sqrt() < MIN_RAY_LINE_ANGLE.sin() {
        return Err(Error::ParallelRay);
    }
    let w0 = p0 - origin;
    let s = (ab * ray.dot(&w0) - dir.dot(&w0)) / den;
    Ok(p0 + s * dir)
}

/// Recover finite 3D endpoints for an infinite line from an observed image
/// segment: each observed endpoint is back-projected and the closest point on
/// the line to that ray is returned.
pub fn trim_endpoints(
    line_w: &PlueckerLine,
    obs: &ImageLineSegment,
    pose: &Pose,
    k: &CameraIntrinsics,
) -> Result<(Vector3<f64>, Vector3<f64>)> {
    project_line(k, &transform_line(pose, line_w))?;
    Ok((
        closest_point_on_line_to_ray(line_w, &obs.start(), pose, k)?,
        closest_point_on_line_to_ray(line_w, &obs.end(), pose, k)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;

    #[test]
    fn recovers_exact_endpoints() {
        let k = CameraIntrinsics::default();
        let pose = Pose::new(Rotation3::new(Vector3::new(0.1, -0.2, 0.05)), Vector3::new(0.3, -0.1, 4.0));
        let a = Vector3::new(-0.5, 0.3, 0.2);
        let b = Vector3::new(0.8, -0.4, 1.0);
        let line = PlueckerLine::from_endpoints(&a, &b).unwrap();
        let obs = ImageLineSegment::new(
            k.project(&pose.transform_point(&a)),
            k.project(&pose.transform_point(&b)),
        );
        let (s, e) = trim_endpoints(&line, &obs, &pose, &k).unwrap();
        assert!((s - a).norm() < 1e-9);
        assert!((e - b).norm() < 1e-9);
    }

    #[test]
    fn fronto_parallel_line_keeps_depth() {
        let k = CameraIntrinsics::default();
        let line = PlueckerLine::from_endpoints(&Vector3::new(0.0, 0.5, 2.0), &Vector3::new(1.0, 0.5, 2.0)).unwrap();
        let obs = ImageLineSegment::new(Vector2::new(100.0, 365.0), Vector2::new(600.0, 365.0));
        let (s, e) = trim_endpoints(&line, &obs, &Pose::identity(), &k).unwrap();
        assert!((s.z - 2.0).abs() < 1e-12 && (e.z - 2.0).abs() < 1e-12);
        // u = 100 → x = (100 - 320) / 500 · 2
        assert!((s.x + 0.88).abs() < 1e-12);
        assert!((e.x - 1.12).abs() < 1e-12);
    }

    #[test]
    fn ray_parallel_to_line_is_error() {
        let k = CameraIntrinsics::default();
        // Line along the optical axis, offset sideways; the principal ray is parallel to it.
        let line = PlueckerLine::from_endpoints(&Vector3::new(0.5, 0.0, 1.0), &Vector3::new(0.5, 0.0, 3.0)).unwrap();
        assert!(matches!(
            closest_point_on_line_to_ray(&line, &Vector2::new(320.0, 240.0), &Pose::identity(), &k),
            Err(Error::ParallelRay)
        ));
    }
}
