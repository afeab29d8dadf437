use alloc::boxed::Box;
use alloc::string::String;

use crate::mesh::CellId;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("nothing to mark: every local estimate is zero")]
    NothingToMark,
    #[error("negative or non-finite local estimate {value} for cell {cell:?}")]
    InvalidEstimate { cell: CellId, value: f64 },
    #[error("marking fraction {0} outside (0, 1]")]
    InvalidFraction(f64),
    #[error("cell {0:?} is not active in this mesh")]
    CellNotActive(CellId),
    #[error("edge lies on the domain boundary")]
    BoundaryEdge,
    #[error("fine mesh is not a refinement of the coarse mesh")]
    MeshesNotNested,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("newton iteration did not converge in {iterations} steps (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("residual grew from {previous:e} to {current:e} in one damped step")]
    ResidualGrowth { previous: f64, current: f64 },
    #[error("linear solve failed: {0}")]
    Factorization(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("run aborted by level observer: {0}")]
    Aborted(String),
    #[error("level {level}: {source}")]
    AtLevel { level: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn at_level(self, level: usize) -> Self {
        Error::AtLevel {
            level,
            source: Box::new(self),
        }
    }

    /// Strips any level annotation.
    pub fn root_cause(&self) -> &Error {
        match self {
            Error::AtLevel { source, .. } => source.root_cause(),
            other => other,
        }
    }
}
