use thiserror::Error;

/// Errors raised by geometry, measurement, optimizer and I/O routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate line: {0}")]
    DegenerateLine(&'static str),

    #[error("projected line is at infinity (l1 = l2 = 0)")]
    LineAtInfinity,

    #[error("point depth {depth} is not in front of the camera")]
    BehindCamera { depth: f64 },

    #[error("back-projected ray is parallel to the 3D line")]
    ParallelRay,

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("no associated pose pairs between trajectories")]
    NoAssociation,

    #[error("trajectory too short: {len} poses for delta {delta}")]
    TrajectoryTooShort { len: usize, delta: usize },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
