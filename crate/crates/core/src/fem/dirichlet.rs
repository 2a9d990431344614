//! Symmetric elimination of Dirichlet constraints.
//!
//! Constrained rows become identity rows and constrained columns move to the
//! right-hand side. The sparsity pattern is kept (eliminated entries are
//! stored as zeros) so repeated systems share one symbolic factorization.

use std::collections::BTreeMap;

use super::FemError;
use crate::linalg::SparseMatrix;

/// Sorted, conflict-free constraint set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DirichletBc {
    dofs: Vec<usize>,
    values: Vec<f64>,
}

impl DirichletBc {
    /// Duplicate dofs must carry identical values.
    pub fn new(pairs: impl IntoIterator<Item = (usize, f64)>) -> Result<Self, FemError> {
        let mut map = BTreeMap::new();
        for (d, v) in pairs {
            if let Some(old) = map.insert(d, v) {
                if old != v {
                    return Err(FemError::ConflictingBc { dof: d, first: old, second: v });
                }
            }
        }
        let (dofs, values) = map.into_iter().unzip();
        Ok(Self { dofs, values })
    }

    pub fn dofs(&self) -> &[usize] {
        &self.dofs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.dofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }

    /// Dense lookup vector: `Some(value)` on constrained dofs.
    pub fn mask(&self, n: usize) -> Vec<Option<f64>> {
        let mut m = vec![None; n];
        for (d, v) in self.dofs.iter().zip(&self.values) {
            m[*d] = Some(*v);
        }
        m
    }

    /// Writes the constrained values into `x`.
    pub fn impose(&self, x: &mut [f64]) {
        for (d, v) in self.dofs.iter().zip(&self.values) {
            x[*d] = *v;
        }
    }
}

fn check(a: &SparseMatrix, rhs: &[f64], bc: &DirichletBc) -> Result<(), FemError> {
    if a.nrows() != a.ncols() || rhs.len() != a.nrows() {
        return Err(FemError::LengthMismatch { expected: a.nrows(), found: rhs.len() });
    }
    if let Some(&d) = bc.dofs.last() {
        if d >= a.nrows() {
            return Err(FemError::BcOutOfRange { dof: d, n: a.nrows() });
        }
    }
    Ok(())
}

/// Returns the constrained matrix and right-hand side.
pub fn apply_dirichlet(a: &SparseMatrix, rhs: &[f64], bc: &DirichletBc) -> Result<(SparseMatrix, Vec<f64>), FemError> {
    check(a, rhs, bc)?;
    let mask = bc.mask(a.nrows());
    let mut b = rhs.to_vec();
    let mut out = a.clone();
    let n = a.nrows();
    let (indptr, indices) = (a.indptr().to_vec(), a.indices().to_vec());
    let mut has_diag = vec![false; n];
    let vals = out.values_mut();
    for r in 0..n {
        for k in indptr[r]..indptr[r + 1] {
            let c = indices[k];
            if mask[r].is_some() {
                if c == r {
                    has_diag[r] = true;
                    vals[k] = 1.0;
                } else {
                    vals[k] = 0.0;
                }
            } else if let Some(g) = mask[c] {
                b[r] -= vals[k] * g;
                vals[k] = 0.0;
            }
        }
    }
    for (d, v) in bc.dofs.iter().zip(&bc.values) {
        b[*d] = *v;
    }
    if bc.dofs.iter().any(|d| !has_diag[*d]) {
        let mut t = crate::linalg::TripletBuilder::with_capacity(n, n, out.nnz() + bc.len());
        for r in 0..n {
            for (c, v) in out.row(r) {
                t.push(r, c, v);
            }
        }
        for d in &bc.dofs {
            if !has_diag[*d] {
                t.push(*d, *d, 1.0);
            }
        }
        out = t.build();
    }
    Ok((out, b))
}

/// Right-hand side lifting only, for a matrix already constrained by [`apply_dirichlet`].
/// `original` must be the unconstrained matrix.
pub fn lift_rhs(original: &SparseMatrix, rhs: &mut [f64], bc: &DirichletBc) -> Result<(), FemError> {
    check(original, rhs, bc)?;
    let mask = bc.mask(original.nrows());
    for r in 0..original.nrows() {
        if mask[r].is_some() {
            continue;
        }
        let mut s = 0.0;
        for (c, v) in original.row(r) {
            if let Some(g) = mask[c] {
                s += v * g;
            }
        }
        rhs[r] -= s;
    }
    bc.impose(rhs);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assembly, DofMap};
    use crate::linalg::{solve_spd, KrylovParams, Nullspace};
    use crate::mesh::unit_square_mesh;
    use std::sync::Arc;

    #[test]
    fn conflicting_values_rejected() {
        assert!(DirichletBc::new([(3, 1.0), (3, 2.0)]).is_err());
        assert_eq!(DirichletBc::new([(3, 1.0), (3, 1.0), (1, 0.0)]).unwrap().dofs(), &[1, 3]);
    }

    #[test]
    fn poisson_with_zero_bc_is_positive() {
        let d = DofMap::new(Arc::new(unit_square_mesh(8)));
        let k = assembly::scalar_p1_stiffness(&d);
        let m = assembly::scalar_p1_mass(&d);
        let f = m.spmv(&vec![1.0; m.nrows()]).unwrap();
        let boundary = d.boundary_nodes().iter().filter(|&&n| n < d.num_pressure_dofs()).map(|&n| (n, 0.0));
        let bc = DirichletBc::new(boundary).unwrap();
        let (a, b) = apply_dirichlet(&k, &f, &bc).unwrap();
        assert!(a.asymmetry() < 1e-15);
        let (x, rep) = solve_spd(&a, &b, KrylovParams::default(), Nullspace::None).unwrap();
        assert!(rep.converged);
        let mask = bc.mask(x.len());
        for (i, xi) in x.iter().enumerate() {
            match mask[i] {
                Some(_) => assert_eq!(*xi, 0.0),
                None => assert!(*xi > 0.0),
            }
        }
        // residual at constrained rows is exactly zero
        let r = a.spmv(&x).unwrap();
        for dof in bc.dofs() {
            assert_eq!(r[*dof] - b[*dof], 0.0);
        }
    }

    #[test]
    fn lift_matches_apply() {
        let d = DofMap::new(Arc::new(unit_square_mesh(3)));
        let k = assembly::scalar_p2_stiffness(&d);
        let rhs: Vec<f64> = (0..k.nrows()).map(|i| (i as f64).sin()).collect();
        let bc = DirichletBc::new(d.boundary_nodes().iter().map(|&n| (n, n as f64 * 0.1))).unwrap();
        let (_, b1) = apply_dirichlet(&k, &rhs, &bc).unwrap();
        let mut b2 = rhs.clone();
        lift_rhs(&k, &mut b2, &bc).unwrap();
        for (x, y) in b1.iter().zip(&b2) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}
