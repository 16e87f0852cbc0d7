//! Multi-point flux (MPFA) and stress (MPSA) finite-volume discretizations on
//! 2D polygonal grids, their coupling for poroelasticity and
//! thermo-poroelasticity, and a verification harness.

pub mod assembly;
pub mod coupled;
pub mod error;
pub mod linsolve;
pub mod local;
pub mod mesh;
pub mod mpfa;
pub mod mpsa;
pub mod physics;
pub mod scalar;
pub mod verify;

pub use error::{MpxaError, Result};
pub use scalar::Scalar;

pub type SparseMatrix = linsolve::CsrMatrix<f64>;
pub type Triplets = linsolve::Triplets<f64>;
