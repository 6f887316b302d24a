//! Visibility handling for projected 3D segments: near-plane culling followed
//! by Liang–Barsky clipping to the image.

use nalgebra::Vector3;

use plslam::frontend::{cull_line, liang_barsky_clip, Rect, Segment2D};
use plslam::geometry::{CameraIntrinsics, Pose};

fn show(label: &str, s: Option<Segment2D>) {
    match s {
        Some(s) => println!(
            "{label:<34} ({:7.2}, {:7.2}) -> ({:7.2}, {:7.2})",
            s.start.x, s.start.y, s.end.x, s.end.y
        ),
        None => println!("{label:<34} not visible"),
    }
}

fn main() {
    let image = Rect::image(640.0, 480.0);
    show("inside", liang_barsky_clip(&Segment2D::from_coords(100.0, 100.0, 300.0, 200.0), &image));
    show("crossing the right border", liang_barsky_clip(&Segment2D::from_coords(500.0, 240.0, 800.0, 240.0), &image));
    show("crossing, reversed", liang_barsky_clip(&Segment2D::from_coords(800.0, 240.0, 500.0, 240.0), &image));
    show("diagonal through two borders", liang_barsky_clip(&Segment2D::from_coords(-100.0, -50.0, 700.0, 550.0), &image));
    show("outside", liang_barsky_clip(&Segment2D::from_coords(-10.0, -10.0, -5.0, 600.0), &image));

    let k = CameraIntrinsics::default();
    let camera = Pose::identity();
    let size = (640.0, 480.0);
    let in_front = (Vector3::new(-0.5, 0.2, 4.0), Vector3::new(0.5, -0.2, 6.0));
    let through_camera_plane = (Vector3::new(0.3, 0.1, 3.0), Vector3::new(0.3, 0.1, -2.0));
    let behind = (Vector3::new(0.0, 0.0, -1.0), Vector3::new(1.0, 0.0, -3.0));
    show("3D segment in front", cull_line(&in_front.0, &in_front.1, &camera, &k, size));
    show("3D segment crossing z = 0", cull_line(&through_camera_plane.0, &through_camera_plane.1, &camera, &k, size));
    show("3D segment behind", cull_line(&behind.0, &behind.1, &camera, &k, size));
}
