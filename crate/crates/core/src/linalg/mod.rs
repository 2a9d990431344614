//! Sparse matrices and the linear solvers built on them.

mod csr;
mod direct;
mod krylov;
mod saddle;

pub use csr::{axpy, dot, norm2, SparseMatrix, TripletBuilder};
pub use direct::{LuCache, SparseLu};
pub use krylov::{
    gmres, pcg, relative_residual, solve_nonsymmetric, solve_spd, Ilu0, IdentityPreconditioner, Jacobi,
    KrylovParams, LinearOperator, Nullspace, Preconditioner, PreconditionerKind, SolveReport,
};
pub use saddle::{combine_pinned, pinned_matrix, remove_gauge_mean, solve_saddle, SaddleMethod, SaddleSolution, SaddleSolver};

#[cfg(test)]
pub(crate) use krylov::tests::dense_solve;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("invalid sparse layout: {0}")]
    InvalidLayout(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: (usize, usize), right: (usize, usize) },
    #[error("zero pivot in row {0}")]
    ZeroPivot(usize),
    #[error("factorization failed: {0}")]
    Factorization(String),
}
