//! Line-oriented text snapshot of a [`FactorGraph`].
//!
//! One record per line, fields separated by whitespace, `#` starts a comment:
//!
//! ```text
//! CAMERA fu fv cu cv baseline
//! POSE id fixed tx ty tz qx qy qz qw
//! POINT id fixed x y z
//! LINE id fixed qx qy qz qw w1 w2
//! EDGE_POINT_STEREO pose point u_left v u_right i11 i12 i13 i22 i23 i33 kernel
//! EDGE_POINT_MONO pose point L|R u v i11 i12 i22 kernel
//! EDGE_LINE pose line L|R us vs ue ve i11 i12 i22 kernel
//! ```
//!
//! `fixed` is `0` or `1`. Poses map world to camera; `LINE` stores `U` as a
//! quaternion and `W` by its first column. Information matrices list their
//! upper triangle row by row. `kernel` is either `none` or `huber <delta>`.

use std::io::{BufRead, Write};

use nalgebra::{Matrix2, Matrix3, Quaternion, Rotation3, UnitQuaternion, Vector2, Vector3};

use super::graph::{FactorGraph, LineEdge, PointEdge, PointMeasurement};
use super::kernel::Huber;
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, OrthonormalLine, Pose, Side};
use crate::measurement::ImageLineSegment;

fn side_tag(side: Side) -> &'static str {
    match side {
        Side::Left => "L",
        Side::Right => "R",
    }
}

fn kernel_text(k: &Option<Huber>) -> String {
    match k {
        Some(h) => format!("huber {}", h.delta),
        None => "none".to_string(),
    }
}

/// Write `graph` in the snapshot format.
pub fn write_graph<W: Write>(mut out: W, graph: &FactorGraph) -> Result<()> {
    let c = &graph.camera;
    writeln!(out, "CAMERA {} {} {} {} {}", c.fu, c.fv, c.cu, c.cv, c.baseline)?;
    for (id, v) in &graph.poses {
        let t = v.pose.translation;
        let q = v.pose.quaternion();
        writeln!(
            out,
            "POSE {id} {} {} {} {} {} {} {} {}",
            u8::from(v.fixed),
            t.x,
            t.y,
            t.z,
            q.i,
            q.j,
            q.k,
            q.w
        )?;
    }
    for (id, v) in &graph.points {
        let p = v.position;
        writeln!(out, "POINT {id} {} {} {} {}", u8::from(v.fixed), p.x, p.y, p.z)?;
    }
    for (id, v) in &graph.lines {
        let q = UnitQuaternion::from_rotation_matrix(&v.line.u);
        writeln!(
            out,
            "LINE {id} {} {} {} {} {} {} {}",
            u8::from(v.fixed),
            q.i,
            q.j,
            q.k,
            q.w,
            v.line.w.x,
            v.line.w.y
        )?;
    }
    for e in &graph.point_edges {
        match &e.measurement {
            PointMeasurement::Stereo { obs, information: i } => writeln!(
                out,
                "EDGE_POINT_STEREO {} {} {} {} {} {} {} {} {} {} {} {}",
                e.pose,
                e.point,
                obs.x,
                obs.y,
                obs.z,
                i[(0, 0)],
                i[(0, 1)],
                i[(0, 2)],
                i[(1, 1)],
                i[(1, 2)],
                i[(2, 2)],
                kernel_text(&e.kernel)
            )?,
            PointMeasurement::Mono {
                side,
                pixel,
                information: i,
            } => writeln!(
                out,
                "EDGE_POINT_MONO {} {} {} {} {} {} {} {} {}",
                e.pose,
                e.point,
                side_tag(*side),
                pixel.x,
                pixel.y,
                i[(0, 0)],
                i[(0, 1)],
                i[(1, 1)],
                kernel_text(&e.kernel)
            )?,
        }
    }
    for e in &graph.line_edges {
        let (s, t) = (e.segment.start(), e.segment.end());
        let i = &e.information;
        writeln!(
            out,
            "EDGE_LINE {} {} {} {} {} {} {} {} {} {} {}",
            e.pose,
            e.line,
            side_tag(e.side),
            s.x,
            s.y,
            t.x,
            t.y,
            i[(0, 0)],
            i[(0, 1)],
            i[(1, 1)],
            kernel_text(&e.kernel)
        )?;
    }
    Ok(())
}

struct Fields<'a> {
    items: std::str::SplitWhitespace<'a>,
    source: &'a str,
    line: usize,
}

impl<'a> Fields<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.source.to_string(),
            line: self.line,
            msg: msg.into(),
        }
    }

    fn next_str(&mut self) -> Result<&'a str> {
        self.items.next().ok_or_else(|| self.err("missing field"))
    }

    fn f64(&mut self) -> Result<f64> {
        let s = self.next_str()?;
        s.parse().map_err(|e| self.err(format!("{s:?}: {e}")))
    }

    fn usize(&mut self) -> Result<usize> {
        let s = self.next_str()?;
        s.parse().map_err(|e| self.err(format!("{s:?}: {e}")))
    }

    fn flag(&mut self) -> Result<bool> {
        match self.next_str()? {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(self.err(format!("expected 0 or 1, got {other:?}"))),
        }
    }

    fn side(&mut self) -> Result<Side> {
        match self.next_str()? {
            "L" => Ok(Side::Left),
            "R" => Ok(Side::Right),
            other => Err(self.err(format!("expected L or R, got {other:?}"))),
        }
    }

    fn kernel(&mut self) -> Result<Option<Huber>> {
        match self.next_str()? {
            "none" => Ok(None),
            "huber" => Ok(Some(Huber::new(self.f64()?))),
            other => Err(self.err(format!("unknown kernel {other:?}"))),
        }
    }

    fn finish(mut self) -> Result<()> {
        match self.items.next() {
            None => Ok(()),
            Some(extra) => Err(self.err(format!("unexpected trailing field {extra:?}"))),
        }
    }
}

/// Parse a snapshot. Errors carry `source` and the 1-based line number.
pub fn read_graph<R: BufRead>(input: R, source: &str) -> Result<FactorGraph> {
    let mut graph = FactorGraph::default();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let text = line.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let mut f = Fields {
            items: text.split_whitespace(),
            source,
            line: idx + 1,
        };
        let tag = f.next_str()?;
        match tag {
            "CAMERA" => {
                let vals = [f.f64()?, f.f64()?, f.f64()?, f.f64()?, f.f64()?];
                graph.camera = CameraIntrinsics::new(vals[0], vals[1], vals[2], vals[3], vals[4])
                    .map_err(|e| f.err(e.to_string()))?;
            }
            "POSE" => {
                let id = f.usize()?;
                let fixed = f.flag()?;
                let t = Vector3::new(f.f64()?, f.f64()?, f.f64()?);
                let (x, y, z, w) = (f.f64()?, f.f64()?, f.f64()?, f.f64()?);
                let q = Quaternion::new(w, x, y, z);
                if q.norm() < 1e-12 {
                    return Err(f.err("zero quaternion"));
                }
                graph.add_pose(id, Pose::from_quaternion(UnitQuaternion::from_quaternion(q), t), fixed);
            }
            "POINT" => {
                let id = f.usize()?;
                let fixed = f.flag()?;
                let p = Vector3::new(f.f64()?, f.f64()?, f.f64()?);
                graph.add_point(id, p, fixed);
            }
            "LINE" => {
                let id = f.usize()?;
                let fixed = f.flag()?;
                let (x, y, z, w) = (f.f64()?, f.f64()?, f.f64()?, f.f64()?);
                let q = Quaternion::new(w, x, y, z);
                let wv = Vector2::new(f.f64()?, f.f64()?);
                if q.norm() < 1e-12 || wv.norm() < 1e-12 {
                    return Err(f.err("degenerate line record"));
                }
                let line = OrthonormalLine {
                    u: Rotation3::from(UnitQuaternion::from_quaternion(q)),
                    w: wv.normalize(),
                };
                graph.add_line(id, line, fixed);
            }
            "EDGE_POINT_STEREO" => {
                let pose = f.usize()?;
                let point = f.usize()?;
                let obs = Vector3::new(f.f64()?, f.f64()?, f.f64()?);
                let (a, b, c, d, e, g) = (f.f64()?, f.f64()?, f.f64()?, f.f64()?, f.f64()?, f.f64()?);
                let information = Matrix3::new(a, b, c, b, d, e, c, e, g);
                let kernel = f.kernel()?;
                let edge = PointEdge {
                    pose,
                    point,
                    measurement: PointMeasurement::Stereo { obs, information },
                    kernel,
                };
                let line_no = f.line;
                f.finish()?;
                graph.add_point_edge(edge).map_err(|e| parse_err(source, line_no, e))?;
            }
            "EDGE_POINT_MONO" => {
                let pose = f.usize()?;
                let point = f.usize()?;
                let side = f.side()?;
                let pixel = Vector2::new(f.f64()?, f.f64()?);
                let (a, b, d) = (f.f64()?, f.f64()?, f.f64()?);
                let kernel = f.kernel()?;
                let edge = PointEdge {
                    pose,
                    point,
                    measurement: PointMeasurement::Mono {
                        side,
                        pixel,
                        information: Matrix2::new(a, b, b, d),
                    },
                    kernel,
                };
                let line_no = f.line;
                f.finish()?;
                graph.add_point_edge(edge).map_err(|e| parse_err(source, line_no, e))?;
            }
            "EDGE_LINE" => {
                let pose = f.usize()?;
                let line = f.usize()?;
                let side = f.side()?;
                let s = Vector2::new(f.f64()?, f.f64()?);
                let t = Vector2::new(f.f64()?, f.f64()?);
                let (a, b, d) = (f.f64()?, f.f64()?, f.f64()?);
                let kernel = f.kernel()?;
                let edge = LineEdge {
                    pose,
                    line,
                    side,
                    segment: ImageLineSegment::new(s, t),
                    information: Matrix2::new(a, b, b, d),
                    kernel,
                };
                let line_no = f.line;
                f.finish()?;
                graph.add_line_edge(edge).map_err(|e| parse_err(source, line_no, e))?;
            }
            other => return Err(f.err(format!("unknown record {other:?}"))),
        }
    }
    Ok(graph)
}

fn parse_err(source: &str, line: usize, e: Error) -> Error {
    Error::Parse {
        path: source.to_string(),
        line,
        msg: e.to_string(),
    }
}
