use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad class of an [`Error`], used by the command line driver to pick an exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Mesh,
    Solver,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} index {index} out of range (table has {len} entries)")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("degenerate element {elem}: zero signed volume")]
    DegenerateElement { elem: usize },

    #[error("degenerate face {nodes:?}: collinear or repeated nodes")]
    DegenerateFace { nodes: [usize; 3] },

    #[error("element {elem} has orientation opposite to element 0")]
    MixedOrientation { elem: usize },

    #[error("inconsistent mesh: {0}")]
    InconsistentMesh(String),

    #[error("refinement level {level} exceeds the default cap {cap} (force to override)")]
    LevelCap { level: u32, cap: u32 },

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("no convergence after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("point lies outside element {elem} (smallest barycentric coordinate {min_bary:e})")]
    OutsideElement { elem: usize, min_bary: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::IndexOutOfRange { .. }
            | Error::DegenerateElement { .. }
            | Error::DegenerateFace { .. }
            | Error::MixedOrientation { .. }
            | Error::InconsistentMesh(_)
            | Error::ResourceLimit(_)
            | Error::OutsideElement { .. } => ErrorKind::Mesh,
            Error::DimensionMismatch(_) | Error::Singular(_) | Error::NotConverged { .. } => {
                ErrorKind::Solver
            }
            Error::LevelCap { .. } | Error::InvalidArgument(_) => ErrorKind::Config,
            Error::Parse { .. } => ErrorKind::Mesh,
            Error::Io { .. } | Error::Csv(_) => ErrorKind::Io,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
