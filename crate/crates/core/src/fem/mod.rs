//! Q2 discretization: reference element, quadrature, DOF numbering, discrete
//! states and sparse assembly.

pub mod dofs;
pub mod quadrature;
pub mod reference;
pub mod sparse;
pub mod state;

pub use dofs::{DofSystem, NodeKind, FIELDS};
pub use quadrature::{EdgeRule, QuadratureRule};
pub use sparse::SparseMatrix;
pub use state::{FieldSample, Space, State};
