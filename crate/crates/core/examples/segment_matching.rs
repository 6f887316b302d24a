//! Geometric line-segment logic: merging broken detections and the four
//! matching conditions, with binary descriptor distances.

use plslam::frontend::{
    combined_similarity, descriptor_distance, match_lines, merge_segments, Descriptor, MatchThresholds,
    MergeThresholds, Segment2D,
};

fn main() {
    let d = Descriptor([0x0123_4567_89ab_cdef, 0xfedc_ba98_7654_3210, 0x0f0f_0f0f_0f0f_0f0f, 0xaaaa_5555_aaaa_5555]);
    let pieces = [
        Segment2D::from_coords(10.0, 100.0, 120.0, 102.0).with_descriptor(d),
        Segment2D::from_coords(125.0, 102.1, 260.0, 105.0).with_descriptor(d.flip_bit(3)),
        Segment2D::from_coords(262.0, 105.1, 400.0, 108.0).with_descriptor(d.flip_bit(7)),
        Segment2D::from_coords(50.0, 300.0, 60.0, 400.0),
    ];
    let merged = merge_segments(&pieces, &MergeThresholds::default());
    println!("{} detections merged into {} segments:", pieces.len(), merged.len());
    for s in &merged {
        println!("  ({:.1}, {:.1}) -> ({:.1}, {:.1})", s.start.x, s.start.y, s.end.x, s.end.y);
    }

    let t = MatchThresholds::default();
    let reference = Segment2D::from_coords(100.0, 100.0, 300.0, 110.0).with_descriptor(d);
    let candidates = [
        ("shifted copy", Segment2D::from_coords(104.0, 98.0, 298.0, 109.0).with_descriptor(d.flip_bit(1))),
        ("perpendicular", Segment2D::from_coords(200.0, 0.0, 210.0, 200.0).with_descriptor(d)),
        ("much shorter", Segment2D::from_coords(100.0, 100.0, 150.0, 102.5).with_descriptor(d)),
        ("no overlap", Segment2D::from_coords(400.0, 115.0, 600.0, 125.0).with_descriptor(d)),
        ("different look", Segment2D::from_coords(100.0, 100.0, 300.0, 110.0).with_descriptor(d.complement())),
    ];
    for (name, c) in candidates {
        let hd = descriptor_distance(reference.descriptor.as_ref().unwrap(), c.descriptor.as_ref().unwrap());
        println!("{name:<14} hamming {hd:3}  match: {}", match_lines(&reference, &c, &t));
    }
    println!("combined similarity (0.4 points, 0.8 lines, weight 0.5): {}", combined_similarity(0.4, 0.8, 0.5));
}
