//! Relative pose error and absolute trajectory error on small trajectories
//! with known answers, plus a TUM file round trip.

use nalgebra::{Rotation3, Vector3};

use plslam::evaluation::{ate, read_trajectory, rpe_rmse, write_trajectory, Trajectory};
use plslam::geometry::Pose;

fn main() -> plslam::Result<()> {
    let n = 20;
    let gt = Trajectory::from_entries(
        (0..n)
            .map(|i| {
                let a = i as f64 * 0.2;
                (i as f64 * 0.1, Pose::new(Rotation3::from_euler_angles(0.0, 0.0, a), Vector3::new(a.cos(), a.sin(), 0.0)))
            })
            .collect(),
    )?;

    let offset = Pose::new(Rotation3::from_euler_angles(0.3, -0.1, 1.0), Vector3::new(4.0, -2.0, 1.0));
    let moved = gt.transformed(&offset);
    println!("rigidly moved copy: ATE unaligned {:.4} m, aligned {:.2e} m", ate(&moved, &gt, false)?, ate(&moved, &gt, true)?);
    let (t, r) = rpe_rmse(&moved, &gt, 1)?;
    println!("rigidly moved copy: RPE {t:.2e} m / {r:.2e} rad");

    let bumped = Trajectory::from_entries(
        gt.entries()
            .iter()
            .enumerate()
            .map(|(i, (ts, p))| {
                let d = if i == 4 { Vector3::new(0.0, 1.0, 0.0) } else { Vector3::zeros() };
                (*ts, Pose::new(p.rotation, p.translation + d))
            })
            .collect(),
    )?;
    println!(
        "one pose off by 1 m: ATE {:.6} m, expected 1/sqrt({n}) = {:.6}",
        ate(&bumped, &gt, false)?,
        1.0 / (n as f64).sqrt()
    );

    let mut buf = Vec::new();
    write_trajectory(&mut buf, &gt)?;
    let back = read_trajectory(buf.as_slice(), "memory")?;
    println!("TUM round trip: {} poses, ATE vs original {:.2e} m", back.len(), ate(&back, &gt, false)?);
    println!("first line: {}", String::from_utf8_lossy(&buf).lines().find(|l| !l.starts_with('#')).unwrap_or(""));
    Ok(())
}
