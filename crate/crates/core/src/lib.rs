//! Point-and-line bundle adjustment back-end for stereo visual SLAM.
//!
//! Lines are optimized in the minimal orthonormal parameterization with
//! analytic re-projection Jacobians; a synthetic stereo simulator and
//! trajectory metrics reproduce a Monte-Carlo comparison of point-only,
//! line-only and combined estimation.

pub mod cli;
pub mod error;
pub mod evaluation;
pub mod export;
pub mod frontend;
pub mod geometry;
pub mod measurement;
pub mod montecarlo;
pub mod odometry;
pub mod optimizer;
pub mod simulator;
pub mod verify;

pub use error::{Error, Result};
