//! Map and trajectory export for external plotting: CSV tables and ASCII PLY.

use std::io::Write;

use nalgebra::Vector3;

use crate::error::Result;
use crate::geometry::{plucker_from_orthonormal, trim_endpoints};
use crate::optimizer::{FactorGraph, VertexId};

/// Finite extent of a line: every observed segment is trimmed onto the line
/// and the two extreme points along its direction are kept.
pub fn line_extent(graph: &FactorGraph, line: VertexId) -> Option<(Vector3<f64>, Vector3<f64>)> {
    let lw = plucker_from_orthonormal(&graph.lines.get(&line)?.line);
    let dir = lw.v.normalize();
    let mut lo: Option<(f64, Vector3<f64>)> = None;
    let mut hi: Option<(f64, Vector3<f64>)> = None;
    for e in graph.line_edges.iter().filter(|e| e.line == line) {
        let Some(pose) = graph.poses.get(&e.pose) else { continue };
        let cam = graph.camera.side_pose(&pose.pose, e.side);
        let Ok((a, b)) = trim_endpoints(&lw, &e.segment, &cam, &graph.camera) else { continue };
        for p in [a, b] {
            let s = p.dot(&dir);
            if lo.map_or(true, |(t, _)| s < t) {
                lo = Some((s, p));
            }
            if hi.map_or(true, |(t, _)| s > t) {
                hi = Some((s, p));
            }
        }
    }
    Some((lo?.1, hi?.1))
}

fn lines_with_extent(graph: &FactorGraph) -> Vec<(VertexId, Vector3<f64>, Vector3<f64>)> {
    graph
        .lines
        .keys()
        .filter_map(|id| line_extent(graph, *id).map(|(a, b)| (*id, a, b)))
        .collect()
}

pub fn write_points_csv<W: Write>(mut out: W, graph: &FactorGraph) -> Result<()> {
    writeln!(out, "id,x,y,z")?;
    for (id, p) in &graph.points {
        let x = p.position;
        writeln!(out, "{id},{},{},{}", x.x, x.y, x.z)?;
    }
    Ok(())
}

pub fn write_lines_csv<W: Write>(mut out: W, graph: &FactorGraph) -> Result<()> {
    writeln!(out, "id,sx,sy,sz,ex,ey,ez")?;
    for (id, a, b) in lines_with_extent(graph) {
        writeln!(out, "{id},{},{},{},{},{},{}", a.x, a.y, a.z, b.x, b.y, b.z)?;
    }
    Ok(())
}

/// Camera positions and orientations (camera to world), one row per pose.
pub fn write_poses_csv<W: Write>(mut out: W, graph: &FactorGraph) -> Result<()> {
    writeln!(out, "id,tx,ty,tz,qx,qy,qz,qw")?;
    for (id, v) in &graph.poses {
        let p = v.pose.inverse();
        let (t, q) = (p.translation, p.quaternion());
        writeln!(out, "{id},{},{},{},{},{},{},{}", t.x, t.y, t.z, q.i, q.j, q.k, q.w)?;
    }
    Ok(())
}

/// ASCII PLY: points first, then two vertices per line joined by an edge.
pub fn write_map_ply<W: Write>(mut out: W, graph: &FactorGraph) -> Result<()> {
    let lines = lines_with_extent(graph);
    let n_vertices = graph.points.len() + 2 * lines.len();
    writeln!(out, "ply")?;
    writeln!(out, "format ascii 1.0")?;
    writeln!(out, "element vertex {n_vertices}")?;
    writeln!(out, "property double x")?;
    writeln!(out, "property double y")?;
    writeln!(out, "property double z")?;
    writeln!(out, "element edge {}", lines.len())?;
    writeln!(out, "property int vertex1")?;
    writeln!(out, "property int vertex2")?;
    writeln!(out, "end_header")?;
    for p in graph.points.values() {
        writeln!(out, "{} {} {}", p.position.x, p.position.y, p.position.z)?;
    }
    for (_, a, b) in &lines {
        writeln!(out, "{} {} {}", a.x, a.y, a.z)?;
        writeln!(out, "{} {} {}", b.x, b.y, b.z)?;
    }
    let base = graph.points.len();
    for i in 0..lines.len() {
        writeln!(out, "{} {}", base + 2 * i, base + 2 * i + 1)?;
    }
    Ok(())
}

/// ASCII PLY of camera centers joined in order.
pub fn write_trajectory_ply<W: Write>(mut out: W, graph: &FactorGraph) -> Result<()> {
    let n = graph.poses.len();
    writeln!(out, "ply")?;
    writeln!(out, "format ascii 1.0")?;
    writeln!(out, "element vertex {n}")?;
    writeln!(out, "property double x")?;
    writeln!(out, "property double y")?;
    writeln!(out, "property double z")?;
    writeln!(out, "element edge {}", n.saturating_sub(1))?;
    writeln!(out, "property int vertex1")?;
    writeln!(out, "property int vertex2")?;
    writeln!(out, "end_header")?;
    for v in graph.poses.values() {
        let c = v.pose.center();
        writeln!(out, "{} {} {}", c.x, c.y, c.z)?;
    }
    for i in 1..n {
        writeln!(out, "{} {}", i - 1, i)?;
    }
    Ok(())
}
