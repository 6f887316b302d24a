use std::collections::BTreeMap;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use super::kernel::Huber;
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, OrthonormalLine, Pose, Side};
use crate::measurement::{line_residual_at, mono_point_residual, stereo_point_residual, ImageLineSegment};

pub type VertexId = usize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseVertex {
    pub pose: Pose,
    pub fixed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointVertex {
    pub position: Vector3<f64>,
    pub fixed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineVertex {
    pub line: OrthonormalLine,
    pub fixed: bool,
}

/// Pixel measurement of a point with its information matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointMeasurement {
    /// Single-camera pixel `(u, v)`.
    Mono {
        side: Side,
        pixel: Vector2<f64>,
        information: Matrix2<f64>,
    },
    /// Rectified stereo `(u_left, v, u_right)`.
    Stereo {
        obs: Vector3<f64>,
        information: Matrix3<f64>,
    },
}

impl PointMeasurement {
    pub fn mono(side: Side, pixel: Vector2<f64>) -> Self {
        PointMeasurement::Mono {
            side,
            pixel,
            information: Matrix2::identity(),
        }
    }

    pub fn stereo(obs: Vector3<f64>) -> Self {
        PointMeasurement::Stereo {
            obs,
            information: Matrix3::identity(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            PointMeasurement::Mono { .. } => 2,
            PointMeasurement::Stereo { .. } => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEdge {
    pub pose: VertexId,
    pub point: VertexId,
    pub measurement: PointMeasurement,
    pub kernel: Option<Huber>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineEdge {
    pub pose: VertexId,
    pub line: VertexId,
    pub side: Side,
    pub segment: ImageLineSegment,
    pub information: Matrix2<f64>,
    pub kernel: Option<Huber>,
}

/// Landmark handle used in normal-equation block maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LandmarkKey {
    Point(VertexId),
    Line(VertexId),
}

/// Pose, point and line vertices connected by pose–point and pose–line
/// re-projection edges.
#[derive(Debug, Clone, Default)]
pub struct FactorGraph {
    pub camera: CameraIntrinsics,
    pub poses: BTreeMap<VertexId, PoseVertex>,
    pub points: BTreeMap<VertexId, PointVertex>,
    pub lines: BTreeMap<VertexId, LineVertex>,
    pub point_edges: Vec<PointEdge>,
    pub line_edges: Vec<LineEdge>,
}

fn is_spd2(m: &Matrix2<f64>) -> bool {
    (m - m.transpose()).norm() <= 1e-12 * m.norm() && m.cholesky().is_some()
}

fn is_spd3(m: &Matrix3<f64>) -> bool {
    (m - m.transpose()).norm() <= 1e-12 * m.norm() && m.cholesky().is_some()
}

impl FactorGraph {
    pub fn new(camera: CameraIntrinsics) -> Self {
        Self {
            camera,
            ..Default::default()
        }
    }

    pub fn add_pose(&mut self, id: VertexId, pose: Pose, fixed: bool) {
        self.poses.insert(id, PoseVertex { pose, fixed });
    }

    pub fn add_point(&mut self, id: VertexId, position: Vector3<f64>, fixed: bool) {
        self.points.insert(id, PointVertex { position, fixed });
    }

    pub fn add_line(&mut self, id: VertexId, line: OrthonormalLine, fixed: bool) {
        self.lines.insert(id, LineVertex { line, fixed });
    }

    pub fn add_point_edge(&mut self, edge: PointEdge) -> Result<()> {
        self.check_point_edge(&edge)?;
        self.point_edges.push(edge);
        Ok(())
    }

    pub fn add_line_edge(&mut self, edge: LineEdge) -> Result<()> {
        self.check_line_edge(&edge)?;
        self.line_edges.push(edge);
        Ok(())
    }

    fn check_point_edge(&self, e: &PointEdge) -> Result<()> {
        if !self.poses.contains_key(&e.pose) {
            return Err(Error::InvalidGraph(format!("point edge references missing pose {}", e.pose)));
        }
        if !self.points.contains_key(&e.point) {
            return Err(Error::InvalidGraph(format!("point edge references missing point {}", e.point)));
        }
        let spd = match &e.measurement {
            PointMeasurement::Mono { information, .. } => is_spd2(information),
            PointMeasurement::Stereo { information, .. } => is_spd3(information),
        };
        if !spd {
            return Err(Error::InvalidGraph("point edge information is not symmetric positive definite".into()));
        }
        Ok(())
    }

    fn check_line_edge(&self, e: &LineEdge) -> Result<()> {
        if !self.poses.contains_key(&e.pose) {
            return Err(Error::InvalidGraph(format!("line edge references missing pose {}", e.pose)));
        }
        if !self.lines.contains_key(&e.line) {
            return Err(Error::InvalidGraph(format!("line edge references missing line {}", e.line)));
        }
        if !is_spd2(&e.information) {
            return Err(Error::InvalidGraph("line edge information is not symmetric positive definite".into()));
        }
        Ok(())
    }

    /// Check edge references, information matrices and the gauge.
    pub fn validate(&self) -> Result<()> {
        for e in &self.point_edges {
            self.check_point_edge(e)?;
        }
        for e in &self.line_edges {
            self.check_line_edge(e)?;
        }
        let free_poses = self.poses.values().any(|p| !p.fixed);
        let fixed_poses = self.poses.values().any(|p| p.fixed);
        let free_landmarks =
            self.points.values().any(|p| !p.fixed) || self.lines.values().any(|l| !l.fixed);
        if free_poses && free_landmarks && !fixed_poses {
            return Err(Error::InvalidGraph(
                "gauge freedom: at least one pose must be fixed when poses and landmarks are both free".into(),
            ));
        }
        Ok(())
    }

    pub fn edge_count(&self) -> usize {
        self.point_edges.len() + self.line_edges.len()
    }

    pub fn remove_line_edges(&mut self) {
        self.line_edges.clear();
    }

    pub fn remove_point_edges(&mut self) {
        self.point_edges.clear();
    }

    /// Unweighted residual of a point edge at the current estimate; `None`
    /// when the point is behind the camera.
    pub fn point_edge_residual(&self, e: &PointEdge) -> Option<nalgebra::DVector<f64>> {
        let pose = &self.poses.get(&e.pose)?.pose;
        let x = &self.points.get(&e.point)?.position;
        match &e.measurement {
            PointMeasurement::Mono { side, pixel, .. } => mono_point_residual(pixel, pose, x, &self.camera, *side)
                .ok()
                .map(|r| nalgebra::DVector::from_column_slice(r.as_slice())),
            PointMeasurement::Stereo { obs, .. } => stereo_point_residual(obs, pose, x, &self.camera)
                .ok()
                .map(|r| nalgebra::DVector::from_column_slice(r.as_slice())),
        }
    }

    pub fn line_edge_residual(&self, e: &LineEdge) -> Option<Vector2<f64>> {
        let pose = &self.poses.get(&e.pose)?.pose;
        let line = &self.lines.get(&e.line)?.line;
        line_residual_at(&e.segment, pose, line, &self.camera, e.side).ok()
    }

    /// Robust cost `Σ ρ(eᵀ Σ⁻¹ e)` over all edges; deactivated edges (behind
    /// camera, line at infinity) contribute zero.
    pub fn total_cost(&self) -> f64 {
        let mut cost = 0.0;
        for e in &self.point_edges {
            if let Some(r) = self.point_edge_residual(e) {
                let s = match &e.measurement {
                    PointMeasurement::Mono { information, .. } => {
                        let r2 = Vector2::new(r[0], r[1]);
                        r2.dot(&(information * r2))
                    }
                    PointMeasurement::Stereo { information, .. } => {
                        let r3 = Vector3::new(r[0], r[1], r[2]);
                        r3.dot(&(information * r3))
                    }
                };
                cost += super::kernel::robust_cost(e.kernel.as_ref(), s);
            }
        }
        for e in &self.line_edges {
            if let Some(r) = self.line_edge_residual(e) {
                let s = r.dot(&(e.information * r));
                cost += super::kernel::robust_cost(e.kernel.as_ref(), s);
            }
        }
        cost
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{orthonormal_from_plucker, PlueckerLine};

    fn one_point_graph(residual: Vector2<f64>, kernel: Option<Huber>) -> FactorGraph {
        let k = CameraIntrinsics::default();
        let mut g = FactorGraph::new(k);
        g.add_pose(0, Pose::identity(), true);
        let x = Vector3::new(0.2, -0.1, 3.0);
        g.add_point(0, x, false);
        let pixel = k.project(&x) + residual;
        g.add_point_edge(PointEdge {
            pose: 0,
            point: 0,
            measurement: PointMeasurement::mono(Side::Left, pixel),
            kernel,
        })
        .unwrap();
        g
    }

    #[test]
    fn quadratic_cost_hand_value() {
        let g = one_point_graph(Vector2::new(3.0, 4.0), None);
        assert!((g.total_cost() - 25.0).abs() < 1e-9);
    }

    #[test]
    fn huber_cost_hand_value() {
        let g = one_point_graph(Vector2::new(3.0, 4.0), Some(Huber::new(1.0)));
        assert!((g.total_cost() - 9.0).abs() < 1e-9);
    }

    #[test]
    fn zero_residual_zero_cost() {
        let g = one_point_graph(Vector2::zeros(), None);
        assert_eq!(g.total_cost(), 0.0);
    }

    #[test]
    fn missing_vertices_rejected() {
        let mut g = FactorGraph::new(CameraIntrinsics::default());
        g.add_pose(0, Pose::identity(), true);
        let err = g.add_point_edge(PointEdge {
            pose: 0,
            point: 7,
            measurement: PointMeasurement::mono(Side::Left, Vector2::zeros()),
            kernel: None,
        });
        assert!(matches!(err, Err(Error::InvalidGraph(_))));
        let l = orthonormal_from_plucker(
            &PlueckerLine::from_endpoints(&Vector3::new(0.0, 0.0, 2.0), &Vector3::new(1.0, 0.0, 2.0)).unwrap(),
        )
        .unwrap();
        g.add_line(3, l, false);
        let err = g.add_line_edge(LineEdge {
            pose: 1,
            line: 3,
            side: Side::Left,
            segment: ImageLineSegment::new(Vector2::zeros(), Vector2::new(1.0, 1.0)),
            information: Matrix2::identity(),
            kernel: None,
        });
        assert!(err.is_err());
    }

    #[test]
    fn non_spd_information_rejected() {
        let mut g = FactorGraph::new(CameraIntrinsics::default());
        g.add_pose(0, Pose::identity(), true);
        g.add_point(0, Vector3::new(0.0, 0.0, 2.0), false);
        let err = g.add_point_edge(PointEdge {
            pose: 0,
            point: 0,
            measurement: PointMeasurement::Mono {
                side: Side::Left,
                pixel: Vector2::zeros(),
                information: Matrix2::new(1.0, 2.0, 2.0, 1.0),
            },
            kernel: None,
        });
        assert!(err.is_err());
    }

    #[test]
    fn gauge_required() {
        let mut g = one_point_graph(Vector2::zeros(), None);
        assert!(g.validate().is_ok());
        g.poses.get_mut(&0).unwrap().fixed = false;
        assert!(g.validate().is_err());
    }

    #[test]
    fn behind_camera_edge_contributes_zero() {
        let mut g = one_point_graph(Vector2::new(3.0, 4.0), None);
        g.points.get_mut(&0).unwrap().position = Vector3::new(0.0, 0.0, -2.0);
        assert_eq!(g.total_cost(), 0.0);
    }
}
