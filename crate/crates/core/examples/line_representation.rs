//! Build a 3D line from two points, factor it into the orthonormal
//! representation, nudge it with a minimal 4-parameter update and move it into
//! a camera frame.

use nalgebra::Vector3;

use plslam::geometry::{
    orthonormal_from_plucker, plucker_from_orthonormal, project_line, transform_line, CameraIntrinsics, LineUpdate,
    PlueckerLine, Pose,
};

fn main() -> plslam::Result<()> {
    let p = Vector3::new(-1.0, 1.0, 5.0);
    let q = Vector3::new(1.0, 1.0, 5.0);
    let line = PlueckerLine::from_endpoints(&p, &q)?;
    println!("Plücker  n = {:.4?}  v = {:.4?}", line.n.as_slice(), line.v.as_slice());
    println!("distance from origin {:.4} m", line.distance_to_origin());

    let o = orthonormal_from_plucker(&line)?;
    println!("U =\n{:.4}", o.u.matrix());
    println!("W column = ({:.4}, {:.4})", o.w1(), o.w2());
    let back = plucker_from_orthonormal(&o);
    println!("round trip projective error {:.2e}", back.projective_distance(&line));

    // Rotate the line about its own normal and shift it away from the origin.
    let moved = o.update(&LineUpdate::new(Vector3::new(0.0, 0.0, 0.1), 0.05));
    let (eu, ew) = moved.invariant_errors();
    let lm = plucker_from_orthonormal(&moved);
    println!(
        "after update: distance {:.4} m, invariant errors {eu:.1e} / {ew:.1e}",
        lm.distance_to_origin()
    );

    let k = CameraIntrinsics::default();
    let camera = Pose::new(nalgebra::Rotation3::from_euler_angles(0.0, 0.1, 0.0), Vector3::new(0.2, 0.0, 0.0));
    let lc = transform_line(&camera, &line);
    let l = project_line(&k, &lc)?;
    println!("image line l' = {:.3?}", (l / l.xy().norm()).as_slice());
    for x in [p, q] {
        let px = k.project(&camera.transform_point(&x));
        println!("  endpoint pixel ({:.2}, {:.2}) on line: {:.2e}", px.x, px.y, l.dot(&px.push(1.0)) / l.xy().norm());
    }
    Ok(())
}
