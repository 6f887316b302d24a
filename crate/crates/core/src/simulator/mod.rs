//! Synthetic stereo house scene: geometry, orbit, noisy rendering with known
//! data association, and graph construction.

mod build;
mod io;
mod render;
mod rng;
mod scene;

pub use build::{
    add_frame_edges, back_projected_plane, build_graph, build_graph_from_sim, line_from_planes, perturb_poses,
    scene_line, triangulate_line, triangulate_point_stereo, EdgeKernels, FeatureMode, InitMode, LandmarkInit,
    MIN_LINE_PLANE_ANGLE,
};
pub use io::{read_observations, read_scene, write_observations, write_scene};
pub use render::{render_observations, FrameObservations, LineFeature, PointFeature, Simulation, MIN_SEGMENT_PIXELS};
pub use rng::SplitMix64;
pub use scene::{
    generate_house_scene, generate_trajectory, generate_trajectory_around, look_at, SceneLine, ScenePoint,
    SimConfig, SimScene, TrajectoryConfig, HOUSE_LINE_COUNT,
};
