//! Taylor-Hood P2/P1 spaces, fields and assembly.

pub mod assembly;
pub mod basis;
mod dirichlet;
mod dofmap;
mod field;
pub mod quadrature;

pub use assembly::{
    assemble_convection, assemble_divergence, assemble_graddiv, assemble_mass, assemble_stiffness, block_diag2, load_vector,
    scalar_convection, ConvectionForm,
};
pub use dirichlet::{apply_dirichlet, lift_rhs, DirichletBc};
pub use dofmap::{DofMap, P2Pattern};
pub use field::{Field, FieldKind};
pub use quadrature::QuadratureRule;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("coefficient vector has length {found}, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("field has the wrong kind for this operation")]
    WrongKind,
    #[error("point ({x}, {y}) is outside the mesh")]
    OutsideDomain { x: f64, y: f64 },
    #[error("dof {dof} constrained to both {first} and {second}")]
    ConflictingBc { dof: usize, first: f64, second: f64 },
    #[error("constrained dof {dof} out of range for {n} unknowns")]
    BcOutOfRange { dof: usize, n: usize },
}
