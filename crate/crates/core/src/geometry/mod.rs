//! Poses, 3D line representations and the pinhole stereo camera.

mod camera;
mod line;
mod pose;
mod trim;

pub use camera::{project_line, CameraIntrinsics, Side};
pub use line::{
    line_motion_matrix, orthonormal_from_plucker, plucker_from_orthonormal, plucker_from_points, transform_line,
    update_orthonormal, LineUpdate, OrthonormalLine, PlueckerLine,
};
pub use pose::{pose_update, skew, so3_left_jacobian, Pose, PoseUpdate};
pub use trim::{closest_point_on_line_to_ray, trim_endpoints, MIN_RAY_LINE_ANGLE};
