//! Factor graph of poses, points and lines with a robust Levenberg–Marquardt
//! solver.

mod graph;
mod io;
mod kernel;
mod lm;
mod problem;

pub use graph::{FactorGraph, LandmarkKey, LineEdge, LineVertex, PointEdge, PointMeasurement, PointVertex, PoseVertex, VertexId};
pub use io::{read_graph, write_graph};
pub use kernel::{Huber, CHI2_2DOF_95, CHI2_3DOF_95};
pub use lm::{local_ba, motion_only_ba, solve_lm, SolveOptions, SolveReport, Termination};
pub use problem::{assemble_normal_equations, landmark_dim, Layout, NormalEquations};
