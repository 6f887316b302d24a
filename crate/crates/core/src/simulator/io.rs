//! Text dump and load of scenes and observations.
//!
//! Scene files hold one landmark per line:
//!
//! ```text
//! LINE id sx sy sz ex ey ez
//! POINT id x y z
//! ```
//!
//! Observation files hold a `FRAME` record followed by that frame's features:
//!
//! ```text
//! FRAME frame timestamp tx ty tz qx qy qz qw
//! PT id ul vl ur vr
//! LN id l_us l_vs l_ue l_ve r_us r_vs r_ue r_ve
//! ```
//!
//! The frame pose is the ground-truth world-to-left-camera transform. A side
//! that does not see the feature has all of its fields written as `-`.
//! Lines starting with `#` are comments.

use std::io::{BufRead, Write};

use nalgebra::{Quaternion, UnitQuaternion, Vector2, Vector3};

use super::render::{FrameObservations, LineFeature, PointFeature};
use super::scene::{SceneLine, ScenePoint, SimScene};
use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::measurement::ImageLineSegment;

pub fn write_scene<W: Write>(mut out: W, scene: &SimScene) -> Result<()> {
    writeln!(out, "# LINE id sx sy sz ex ey ez | POINT id x y z")?;
    for l in &scene.lines {
        let (s, e) = (l.start, l.end);
        writeln!(out, "LINE {} {} {} {} {} {} {}", l.id, s.x, s.y, s.z, e.x, e.y, e.z)?;
    }
    for p in &scene.points {
        let x = p.position;
        writeln!(out, "POINT {} {} {} {}", p.id, x.x, x.y, x.z)?;
    }
    Ok(())
}

fn opt2(p: Option<Vector2<f64>>) -> String {
    match p {
        Some(p) => format!("{} {}", p.x, p.y),
        None => "- -".to_string(),
    }
}

fn opt_seg(s: Option<&ImageLineSegment>) -> String {
    match s {
        Some(s) => format!("{} {}", opt2(Some(s.start())), opt2(Some(s.end()))),
        None => "- - - -".to_string(),
    }
}

pub fn write_observations<W: Write>(mut out: W, frames: &[FrameObservations]) -> Result<()> {
    writeln!(out, "# FRAME frame timestamp tx ty tz qx qy qz qw | PT id ul vl ur vr | LN id left(us vs ue ve) right(us vs ue ve)")?;
    for f in frames {
        let t = f.pose.translation;
        let q = f.pose.quaternion();
        writeln!(
            out,
            "FRAME {} {} {} {} {} {} {} {} {}",
            f.frame, f.timestamp, t.x, t.y, t.z, q.i, q.j, q.k, q.w
        )?;
        for p in &f.points {
            writeln!(out, "PT {} {} {}", p.id, opt2(p.left), opt2(p.right))?;
        }
        for l in &f.lines {
            writeln!(out, "LN {} {} {}", l.id, opt_seg(l.left.as_ref()), opt_seg(l.right.as_ref()))?;
        }
    }
    Ok(())
}

struct Record<'a> {
    fields: Vec<&'a str>,
    pos: usize,
    source: &'a str,
    line: usize,
}

impl<'a> Record<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.source.to_string(),
            line: self.line,
            msg: msg.into(),
        }
    }

    fn next(&mut self) -> Result<&'a str> {
        let f = self.fields.get(self.pos).copied().ok_or_else(|| self.err("missing field"))?;
        self.pos += 1;
        Ok(f)
    }

    fn f64(&mut self) -> Result<f64> {
        let s = self.next()?;
        s.parse().map_err(|e| self.err(format!("{s:?}: {e}")))
    }

    fn usize(&mut self) -> Result<usize> {
        let s = self.next()?;
        s.parse().map_err(|e| self.err(format!("{s:?}: {e}")))
    }

    fn vec3(&mut self) -> Result<Vector3<f64>> {
        Ok(Vector3::new(self.f64()?, self.f64()?, self.f64()?))
    }

    fn opt2(&mut self) -> Result<Option<Vector2<f64>>> {
        let a = self.next()?;
        let b = self.next()?;
        match (a, b) {
            ("-", "-") => Ok(None),
            _ => {
                let x = a.parse().map_err(|e| self.err(format!("{a:?}: {e}")))?;
                let y = b.parse().map_err(|e| self.err(format!("{b:?}: {e}")))?;
                Ok(Some(Vector2::new(x, y)))
            }
        }
    }

    fn opt_seg(&mut self) -> Result<Option<ImageLineSegment>> {
        match (self.opt2()?, self.opt2()?) {
            (Some(s), Some(e)) => Ok(Some(ImageLineSegment::new(s, e))),
            (None, None) => Ok(None),
            _ => Err(self.err("segment with only one endpoint")),
        }
    }

    fn done(&self) -> Result<()> {
        if self.pos == self.fields.len() {
            Ok(())
        } else {
            Err(self.err(format!("expected {} fields, got {}", self.pos, self.fields.len())))
        }
    }
}

fn records<R: BufRead>(input: R) -> impl Iterator<Item = (usize, std::io::Result<String>)> {
    input.lines().enumerate().map(|(i, l)| (i + 1, l))
}

pub fn read_scene<R: BufRead>(input: R, source: &str) -> Result<SimScene> {
    let mut scene = SimScene::default();
    for (line_no, line) in records(input) {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let mut r = Record {
            fields: text.split_whitespace().collect(),
            pos: 0,
            source,
            line: line_no,
        };
        match r.next()? {
            "LINE" => {
                let id = r.usize()?;
                let start = r.vec3()?;
                let end = r.vec3()?;
                r.done()?;
                if (end - start).norm() == 0.0 {
                    return Err(r.err("degenerate segment"));
                }
                scene.lines.push(SceneLine { id, start, end });
            }
            "POINT" => {
                let id = r.usize()?;
                let position = r.vec3()?;
                r.done()?;
                scene.points.push(ScenePoint { id, position });
            }
            other => return Err(r.err(format!("unknown record {other:?}"))),
        }
    }
    Ok(scene)
}

pub fn read_observations<R: BufRead>(input: R, source: &str) -> Result<Vec<FrameObservations>> {
    let mut frames: Vec<FrameObservations> = Vec::new();
    for (line_no, line) in records(input) {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let mut r = Record {
            fields: text.split_whitespace().collect(),
            pos: 0,
            source,
            line: line_no,
        };
        match r.next()? {
            "FRAME" => {
                let frame = r.usize()?;
                let timestamp = r.f64()?;
                let t = r.vec3()?;
                let (x, y, z, w) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
                r.done()?;
                let q = Quaternion::new(w, x, y, z);
                if q.norm() < 1e-12 {
                    return Err(r.err("zero quaternion"));
                }
                frames.push(FrameObservations {
                    frame,
                    timestamp,
                    pose: Pose::from_quaternion(UnitQuaternion::from_quaternion(q), t),
                    points: Vec::new(),
                    lines: Vec::new(),
                });
            }
            "PT" => {
                let id = r.usize()?;
                let left = r.opt2()?;
                let right = r.opt2()?;
                r.done()?;
                let f = frames.last_mut().ok_or_else(|| r.err("feature before first FRAME"))?;
                f.points.push(PointFeature { id, left, right });
            }
            "LN" => {
                let id = r.usize()?;
                let left = r.opt_seg()?;
                let right = r.opt_seg()?;
                r.done()?;
                let f = frames.last_mut().ok_or_else(|| r.err("feature before first FRAME"))?;
                f.lines.push(LineFeature { id, left, right });
            }
            other => return Err(r.err(format!("unknown record {other:?}"))),
        }
    }
    Ok(frames)
}
