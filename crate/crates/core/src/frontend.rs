//! Image-free front-end geometry: segment merging, line matching conditions,
//! binary descriptor distance, visibility culling and Liang–Barsky clipping.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Pose};

/// Near clipping plane used by [`cull_line`], metres.
pub const NEAR_PLANE: f64 = 1e-4;

/// 256-bit binary descriptor (LBD/ORB layout).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Descriptor(pub [u64; 4]);

impl Descriptor {
    pub fn complement(&self) -> Descriptor {
        Descriptor(self.0.map(|w| !w))
    }

    pub fn flip_bit(&self, bit: usize) -> Descriptor {
        let mut out = *self;
        out.0[bit / 64] ^= 1u64 << (bit % 64);
        out
    }
}

impl fmt::Display for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for w in &self.0 {
            write!(f, "{w:016x}")?;
        }
        Ok(())
    }
}

impl FromStr for Descriptor {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.len() != 64 || !s.is_ascii() {
            return Err(format!("descriptor must be 64 hex digits, got {:?}", s));
        }
        let mut words = [0u64; 4];
        for (i, w) in words.iter_mut().enumerate() {
            *w = u64::from_str_radix(&s[16 * i..16 * (i + 1)], 16).map_err(|e| e.to_string())?;
        }
        Ok(Descriptor(words))
    }
}

/// Hamming distance between two descriptors, 0..=256.
pub fn descriptor_distance(a: &Descriptor, b: &Descriptor) -> u32 {
    a.0.iter().zip(b.0.iter()).map(|(x, y)| (x ^ y).count_ones()).sum()
}

/// Directed 2D segment in pixels; direction runs from `start` to `end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment2D {
    pub start: Vector2<f64>,
    pub end: Vector2<f64>,
    pub descriptor: Option<Descriptor>,
}

impl Segment2D {
    pub fn new(start: Vector2<f64>, end: Vector2<f64>) -> Self {
        Self {
            start,
            end,
            descriptor: None,
        }
    }

    pub fn from_coords(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::new(Vector2::new(x0, y0), Vector2::new(x1, y1))
    }

    pub fn with_descriptor(mut self, d: Descriptor) -> Self {
        self.descriptor = Some(d);
        self
    }

    pub fn delta(&self) -> Vector2<f64> {
        self.end - self.start
    }

    pub fn length(&self) -> f64 {
        self.delta().norm()
    }

    pub fn midpoint(&self) -> Vector2<f64> {
        0.5 * (self.start + self.end)
    }

    pub fn direction(&self) -> Vector2<f64> {
        self.delta() / self.length()
    }

    /// Distance from `p` to the infinite supporting line.
    pub fn line_distance(&self, p: &Vector2<f64>) -> f64 {
        let d = self.direction();
        let w = p - self.start;
        (d.x * w.y - d.y * w.x).abs()
    }
}

/// Angle between the directed segments, in `[0, π]`.
pub fn direction_difference(a: &Segment2D, b: &Segment2D) -> f64 {
    let (da, db) = (a.delta(), b.delta());
    let cross = da.x * db.y - da.y * db.x;
    cross.atan2(da.dot(&db)).abs()
}

fn descriptors_within(a: &Segment2D, b: &Segment2D, max: u32) -> bool {
    match (&a.descriptor, &b.descriptor) {
        (Some(x), Some(y)) => descriptor_distance(x, y) < max,
        _ => true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeThresholds {
    /// Maximum direction difference, radians.
    pub angle: f64,
    /// Maximum endpoint gap `l`, pixels.
    pub gap: f64,
    /// Maximum midpoint-to-line distance `d`, pixels.
    pub distance: f64,
    /// Maximum descriptor distance, bits. Ignored when a descriptor is absent.
    pub descriptor_max: u32,
}

impl Default for MergeThresholds {
    fn default() -> Self {
        Self {
            angle: 0.035,
            gap: 10.0,
            distance: 1.5,
            descriptor_max: 80,
        }
    }
}

/// Minimum distance between the endpoints of two segments.
pub fn endpoint_gap(a: &Segment2D, b: &Segment2D) -> f64 {
    [(a.start, b.start), (a.start, b.end), (a.end, b.start), (a.end, b.end)]
        .iter()
        .map(|(p, q)| (p - q).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Distance from the midpoint of the shorter segment to the line of the longer.
pub fn midpoint_distance(a: &Segment2D, b: &Segment2D) -> f64 {
    let (short, long) = if a.length() <= b.length() { (a, b) } else { (b, a) };
    long.line_distance(&short.midpoint())
}

fn merge_pair(a: &Segment2D, b: &Segment2D) -> Segment2D {
    let long = if a.length() >= b.length() { a } else { b };
    let dir = long.direction();
    let mut lo = (f64::INFINITY, long.start);
    let mut hi = (f64::NEG_INFINITY, long.end);
    for p in [a.start, a.end, b.start, b.end] {
        let t = (p - long.start).dot(&dir);
        if t < lo.0 {
            lo = (t, p);
        }
        if t > hi.0 {
            hi = (t, p);
        }
    }
    Segment2D {
        start: lo.1,
        end: hi.1,
        descriptor: long.descriptor,
    }
}

/// Merge segments that belong to the same image line.
///
/// Candidate pairs pass all gates (direction, gap `l`, midpoint distance `d`,
/// descriptor). Each pass merges disjoint candidate pairs in ascending order
/// of `l`; passes repeat until no candidate remains. The merged segment spans
/// the two extreme endpoints along the longer segment's direction.
pub fn merge_segments(segments: &[Segment2D], t: &MergeThresholds) -> Vec<Segment2D> {
    let mut current: Vec<Segment2D> = segments.iter().filter(|s| s.length() > 0.0).copied().collect();
    loop {
        let mut candidates = Vec::new();
        for i in 0..current.len() {
            for j in i + 1..current.len() {
                let (a, b) = (&current[i], &current[j]);
                if direction_difference(a, b) >= t.angle || !descriptors_within(a, b, t.descriptor_max) {
                    continue;
                }
                let gap = endpoint_gap(a, b);
                if gap < t.gap && midpoint_distance(a, b) < t.distance {
                    candidates.push((gap, i, j));
                }
            }
        }
        if candidates.is_empty() {
            return current;
        }
        candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let mut replaced: Vec<Option<Segment2D>> = current.iter().map(|s| Some(*s)).collect();
        let mut used = vec![false; current.len()];
        for &(_, i, j) in &candidates {
            if used[i] || used[j] {
                continue;
            }
            used[i] = true;
            used[j] = true;
            replaced[i] = Some(merge_pair(&current[i], &current[j]));
            replaced[j] = None;
        }
        current = replaced.into_iter().flatten().collect();
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchThresholds {
    /// Maximum direction difference Φ, radians.
    pub angle: f64,
    /// Minimum length ratio τ in (0, 1].
    pub length_ratio: f64,
    /// Minimum overlap ratio β in (0, 1].
    pub overlap_ratio: f64,
    /// Descriptor distance bound, bits.
    pub descriptor_max: u32,
}

impl Default for MatchThresholds {
    fn default() -> Self {
        Self {
            angle: 0.1,
            length_ratio: 0.7,
            overlap_ratio: 0.5,
            descriptor_max: 80,
        }
    }
}

fn projected_overlap(onto: &Segment2D, other: &Segment2D) -> f64 {
    let dir = onto.direction();
    let t0 = (other.start - onto.start).dot(&dir);
    let t1 = (other.end - onto.start).dot(&dir);
    let lo = t0.min(t1).max(0.0);
    let hi = t0.max(t1).min(onto.length());
    (hi - lo).max(0.0)
}

/// Overlap length of two segments: the shared extent of each projected onto
/// the other's supporting line, taking the smaller of the two.
pub fn overlap_length(a: &Segment2D, b: &Segment2D) -> f64 {
    projected_overlap(a, b).min(projected_overlap(b, a))
}

/// True iff the direction, length-ratio, overlap and descriptor conditions
/// all hold.
pub fn match_lines(a: &Segment2D, b: &Segment2D, t: &MatchThresholds) -> bool {
    let (la, lb) = (a.length(), b.length());
    if la == 0.0 || lb == 0.0 {
        return false;
    }
    let (short, long) = (la.min(lb), la.max(lb));
    direction_difference(a, b) < t.angle
        && short / long > t.length_ratio
        && overlap_length(a, b) / short > t.overlap_ratio
        && descriptors_within(a, b, t.descriptor_max)
}

/// Axis-aligned clip rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl Rect {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Self {
        Self { xmin, ymin, xmax, ymax }
    }

    /// `[0, width] × [0, height]`.
    pub fn image(width: f64, height: f64) -> Self {
        Self::new(0.0, 0.0, width, height)
    }

    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }
}

/// Liang–Barsky parametric clipping. Keeps the original orientation; returns
/// `None` when nothing of positive length remains inside `rect`.
pub fn liang_barsky_clip(seg: &Segment2D, rect: &Rect) -> Option<Segment2D> {
    let d = seg.delta();
    let p = [-d.x, d.x, -d.y, d.y];
    let q = [
        seg.start.x - rect.xmin,
        rect.xmax - seg.start.x,
        seg.start.y - rect.ymin,
        rect.ymax - seg.start.y,
    ];
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (pk, qk) in p.iter().zip(q.iter()) {
        if *pk == 0.0 {
            if *qk < 0.0 {
                return None;
            }
        } else {
            let r = qk / pk;
            if *pk < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    if t0 >= t1 {
        return None;
    }
    let start = if t0 > 0.0 { seg.start + t0 * d } else { seg.start };
    let end = if t1 < 1.0 { seg.start + t1 * d } else { seg.end };
    Some(Segment2D {
        start,
        end,
        descriptor: seg.descriptor,
    })
}

/// Project a 3D segment into the camera at `pose`, keeping only the visible
/// part.
///
/// Endpoints behind the near plane are replaced by the intersection
/// `X_s + λ (X_e − X_s)` with that plane; the projected segment is then
/// clipped to the image with [`liang_barsky_clip`].
pub fn cull_line(
    start_w: &Vector3<f64>,
    end_w: &Vector3<f64>,
    pose: &Pose,
    k: &CameraIntrinsics,
    image: (f64, f64),
) -> Option<Segment2D> {
    let mut xs = pose.transform_point(start_w);
    let mut xe = pose.transform_point(end_w);
    let (front_s, front_e) = (xs.z > NEAR_PLANE, xe.z > NEAR_PLANE);
    match (front_s, front_e) {
        (false, false) => return None,
        (true, true) => {}
        _ => {
            let lambda = (NEAR_PLANE - xs.z) / (xe.z - xs.z);
            let cut = xs + lambda * (xe - xs);
            if front_s {
                xe = cut;
            } else {
                xs = cut;
            }
        }
    }
    let seg = Segment2D::new(k.project(&xs), k.project(&xe));
    if !(seg.length() > 0.0) || !seg.length().is_finite() {
        return None;
    }
    liang_barsky_clip(&seg, &Rect::image(image.0, image.1))
}

/// Weighted combination `λ s_p + (1 − λ) s_l` of point and line similarity
/// scores.
pub fn combined_similarity(s_point: f64, s_line: f64, weight: f64) -> f64 {
    weight * s_point + (1.0 - weight) * s_line
}

/// Write segments, one per line: `xs ys xe ye [descriptor-hex]`.
pub fn write_segments<W: Write>(mut out: W, segments: &[Segment2D]) -> Result<()> {
    writeln!(out, "# xs ys xe ye [descriptor]")?;
    for s in segments {
        write!(out, "{} {} {} {}", s.start.x, s.start.y, s.end.x, s.end.y)?;
        if let Some(d) = &s.descriptor {
            write!(out, " {d}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_segments<R: BufRead>(input: R, source: &str) -> Result<Vec<Segment2D>> {
    let mut out = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: source.to_string(),
            line: idx + 1,
            msg,
        };
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 4 && fields.len() != 5 {
            return Err(err(format!("expected 4 or 5 fields, got {}", fields.len())));
        }
        let mut v = [0.0; 4];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f.parse().map_err(|e| err(format!("{f:?}: {e}")))?;
        }
        let mut seg = Segment2D::from_coords(v[0], v[1], v[2], v[3]);
        if let Some(hex) = fields.get(4) {
            seg.descriptor = Some(hex.parse().map_err(err)?);
        }
        out.push(seg);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hamming_examples() {
        let d = Descriptor([0x0123_4567_89ab_cdef, 42, u64::MAX, 7]);
        assert_eq!(descriptor_distance(&d, &d), 0);
        assert_eq!(descriptor_distance(&d, &d.complement()), 256);
        assert_eq!(descriptor_distance(&d, &d.flip_bit(200)), 1);
    }

    #[test]
    fn descriptor_hex_round_trip() {
        let d = Descriptor([1, 2, 0xdead_beef, u64::MAX]);
        let s = d.to_string();
        assert_eq!(s.len(), 64);
        assert_eq!(s.parse::<Descriptor>().unwrap(), d);
        assert!("xyz".parse::<Descriptor>().is_err());
    }

    #[test]
    fn collinear_pieces_merge() {
        let segs = [Segment2D::from_coords(0.0, 0.0, 1.0, 0.0), Segment2D::from_coords(1.01, 0.0, 2.0, 0.0)];
        let t = MergeThresholds {
            angle: 0.02,
            gap: 0.05,
            distance: 0.05,
            descriptor_max: 80,
        };
        let merged = merge_segments(&segs, &t);
        assert_eq!(merged, vec![Segment2D::from_coords(0.0, 0.0, 2.0, 0.0)]);
    }

    #[test]
    fn perpendicular_segments_not_merged() {
        let segs = [Segment2D::from_coords(0.0, 0.0, 1.0, 0.0), Segment2D::from_coords(1.0, 0.0, 1.0, 1.0)];
        assert_eq!(merge_segments(&segs, &MergeThresholds::default()), segs.to_vec());
        assert!(merge_segments(&[], &MergeThresholds::default()).is_empty());
    }

    #[test]
    fn opposite_directions_not_merged() {
        let segs = [Segment2D::from_coords(0.0, 0.0, 1.0, 0.0), Segment2D::from_coords(2.0, 0.0, 1.01, 0.0)];
        assert_eq!(merge_segments(&segs, &MergeThresholds::default()).len(), 2);
    }

    #[test]
    fn descriptor_gate_blocks_merge() {
        let d = Descriptor([0; 4]);
        let segs = [
            Segment2D::from_coords(0.0, 0.0, 1.0, 0.0).with_descriptor(d),
            Segment2D::from_coords(1.01, 0.0, 2.0, 0.0).with_descriptor(d.complement()),
        ];
        assert_eq!(merge_segments(&segs, &MergeThresholds::default()).len(), 2);
    }

    #[test]
    fn chains_merge_to_fixed_point() {
        let segs: Vec<_> = (0..5)
            .map(|i| Segment2D::from_coords(i as f64 * 10.0, 0.0, i as f64 * 10.0 + 9.0, 0.0))
            .collect();
        let merged = merge_segments(&segs, &MergeThresholds::default());
        assert_eq!(merged, vec![Segment2D::from_coords(0.0, 0.0, 49.0, 0.0)]);
        assert_eq!(merge_segments(&merged, &MergeThresholds::default()), merged);
    }

    #[test]
    fn match_identity_and_perpendicular() {
        let a = Segment2D::from_coords(0.0, 0.0, 10.0, 3.0);
        assert!(match_lines(&a, &a, &MatchThresholds::default()));
        let b = Segment2D::from_coords(0.0, 0.0, 0.0, 10.0);
        let c = Segment2D::from_coords(0.0, 0.0, 10.0, 0.0);
        assert!(!match_lines(&b, &c, &MatchThresholds::default()));
    }

    #[test]
    fn match_hand_overlap() {
        let a = Segment2D::from_coords(0.0, 0.0, 10.0, 0.0);
        let b = Segment2D::from_coords(5.0, 0.1, 15.0, 0.1);
        assert!((overlap_length(&a, &b) - 5.0).abs() < 1e-12);
        let t = MatchThresholds {
            angle: 0.05,
            length_ratio: 0.9,
            overlap_ratio: 0.4,
            descriptor_max: 80,
        };
        assert!(match_lines(&a, &b, &t));
        let strict = MatchThresholds {
            overlap_ratio: 0.6,
            ..t
        };
        assert!(!match_lines(&a, &b, &strict));
    }

    #[test]
    fn match_length_and_descriptor_conditions() {
        let a = Segment2D::from_coords(0.0, 0.0, 10.0, 0.0);
        let short = Segment2D::from_coords(0.0, 0.0, 5.0, 0.0);
        assert!(!match_lines(&a, &short, &MatchThresholds::default()));
        let d = Descriptor([3; 4]);
        let a1 = a.with_descriptor(d);
        let a2 = a.with_descriptor(d.complement());
        assert!(!match_lines(&a1, &a2, &MatchThresholds::default()));
        assert!(match_lines(&a1, &a.with_descriptor(d.flip_bit(3)), &MatchThresholds::default()));
    }

    #[test]
    fn clip_examples() {
        let r = Rect::new(0.0, 0.0, 10.0, 10.0);
        let inside = Segment2D::from_coords(1.0, 2.0, 8.0, 9.0);
        assert_eq!(liang_barsky_clip(&inside, &r), Some(inside));
        let s = Segment2D::from_coords(-5.0, 5.0, 5.0, 5.0);
        assert_eq!(liang_barsky_clip(&s, &r), Some(Segment2D::from_coords(0.0, 5.0, 5.0, 5.0)));
        let reversed = Segment2D::from_coords(5.0, 5.0, -5.0, 5.0);
        assert_eq!(liang_barsky_clip(&reversed, &r), Some(Segment2D::from_coords(5.0, 5.0, 0.0, 5.0)));
        assert_eq!(liang_barsky_clip(&Segment2D::from_coords(11.0, 0.0, 20.0, 5.0), &r), None);
        assert_eq!(liang_barsky_clip(&Segment2D::from_coords(-1.0, 12.0, 12.0, 12.0), &r), None);
    }

    #[test]
    fn cull_fully_visible_segment_unchanged() {
        let k = CameraIntrinsics::default();
        let a = Vector3::new(-0.5, 0.2, 4.0);
        let b = Vector3::new(0.3, -0.4, 5.0);
        let seg = cull_line(&a, &b, &Pose::identity(), &k, (640.0, 480.0)).unwrap();
        assert_eq!(seg.start, k.project(&a));
        assert_eq!(seg.end, k.project(&b));
    }

    #[test]
    fn cull_behind_and_crossing() {
        let k = CameraIntrinsics::default();
        let img = (640.0, 480.0);
        assert!(cull_line(&Vector3::new(0.0, 0.0, -1.0), &Vector3::new(1.0, 0.0, -2.0), &Pose::identity(), &k, img)
            .is_none());
        // Along the optical axis: the near-plane point projects onto the
        // principal point, same as the front endpoint, so nothing remains.
        assert!(cull_line(&Vector3::new(0.0, 0.0, 1.0), &Vector3::new(0.0, 0.0, -1.0), &Pose::identity(), &k, img)
            .is_none());
        // Crossing segment keeps orientation from the visible start.
        let seg = cull_line(&Vector3::new(0.1, 0.1, 2.0), &Vector3::new(0.1, 0.3, -2.0), &Pose::identity(), &k, img)
            .unwrap();
        assert_eq!(seg.start, k.project(&Vector3::new(0.1, 0.1, 2.0)));
        assert!((seg.end.y - 480.0).abs() < 1e-9);
        assert!(seg.end.y > seg.start.y);
    }

    #[test]
    fn similarity_combination() {
        assert_eq!(combined_similarity(0.3, 0.9, 1.0), 0.3);
        assert_eq!(combined_similarity(0.3, 0.9, 0.0), 0.9);
        assert!((combined_similarity(0.4, 0.8, 0.5) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn segment_file_round_trip_and_errors() {
        let segs = vec![
            Segment2D::from_coords(0.5, 1.25, 3.0, -4.0),
            Segment2D::from_coords(1.0 / 3.0, 2.0, 7.0, 8.0).with_descriptor(Descriptor([9, 8, 7, 6])),
        ];
        let mut buf = Vec::new();
        write_segments(&mut buf, &segs).unwrap();
        assert_eq!(read_segments(&buf[..], "mem").unwrap(), segs);
        let bad = b"1 2 3\n";
        match read_segments(&bad[..], "mem") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
    }
}
