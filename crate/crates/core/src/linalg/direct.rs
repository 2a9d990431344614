//! Sparse LU through faer.
//!
//! Our CSR arrays read as CSC are the transpose of the matrix, so we factor
//! `Aᵀ` and answer `A x = b` with a transposed solve.

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, MatMut};

use super::csr::SparseMatrix;
use super::LinalgError;

/// A numeric LU factorization of a square sparse matrix.
pub struct SparseLu {
    n: usize,
    lu: Lu<usize, f64>,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu").field("n", &self.n).finish()
    }
}

fn transposed_view(a: &SparseMatrix) -> Result<SparseColMatRef<'_, usize, f64>, LinalgError> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::ShapeMismatch { left: (a.nrows(), a.ncols()), right: (a.ncols(), a.nrows()) });
    }
    let sym = SymbolicSparseColMatRef::new_checked(a.ncols(), a.nrows(), a.indptr(), None, a.indices());
    Ok(SparseColMatRef::new(sym, a.values()))
}

fn symbolic(a: &SparseMatrix) -> Result<SymbolicLu<usize>, LinalgError> {
    let view = transposed_view(a)?;
    SymbolicLu::try_new(view.symbolic()).map_err(|e| LinalgError::Factorization(format!("{e:?}")))
}

impl SparseLu {
    pub fn new(a: &SparseMatrix) -> Result<Self, LinalgError> {
        Self::with_symbolic(symbolic(a)?, a)
    }

    fn with_symbolic(sym: SymbolicLu<usize>, a: &SparseMatrix) -> Result<Self, LinalgError> {
        let view = transposed_view(a)?;
        let lu = Lu::try_new_with_symbolic(sym, view).map_err(|e| LinalgError::Factorization(format!("{e:?}")))?;
        Ok(Self { n: a.nrows(), lu })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves in place; `b` holds the solution on return.
    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<(), LinalgError> {
        if b.len() != self.n {
            return Err(LinalgError::DimensionMismatch { expected: self.n, found: b.len() });
        }
        let rhs = MatMut::from_column_major_slice_mut(b, self.n, 1);
        self.lu.solve_transpose_in_place_with_conj(Conj::No, rhs);
        if b.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::Factorization("non-finite solution (singular matrix?)".into()));
        }
        Ok(())
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }
}

/// Keeps the symbolic analysis of the last matrix and reuses it when the
/// next matrix has the same sparsity pattern.
#[derive(Default)]
pub struct LuCache {
    pattern: Option<(Vec<usize>, Vec<usize>)>,
    symbolic: Option<SymbolicLu<usize>>,
}

impl LuCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn factor(&mut self, a: &SparseMatrix) -> Result<SparseLu, LinalgError> {
        let hit = matches!(&self.pattern, Some((p, i)) if p == a.indptr() && i == a.indices());
        if !hit {
            self.symbolic = Some(symbolic(a)?);
            self.pattern = Some((a.indptr().to_vec(), a.indices().to_vec()));
        }
        let sym = self.symbolic.clone().expect("symbolic set above");
        SparseLu::with_symbolic(sym, a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::csr::TripletBuilder;
    use crate::linalg::dense_solve;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> SparseMatrix {
        let mut t = TripletBuilder::new(n, n);
        for i in 0..n {
            t.push(i, i, 4.0 + rng.gen::<f64>());
            for _ in 0..3 {
                t.push(i, rng.gen_range(0..n), rng.gen_range(-1.0..1.0));
            }
        }
        t.build()
    }

    #[test]
    fn matches_dense_solve_on_nonsymmetric_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_matrix(40, &mut rng);
        let b: Vec<f64> = (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = SparseLu::new(&a).unwrap().solve(&b).unwrap();
        let expect = dense_solve(a.to_dense(), b);
        for (u, v) in x.iter().zip(&expect) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn cache_reuses_symbolic_for_same_pattern() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_matrix(30, &mut rng);
        let mut cache = LuCache::new();
        let b = vec![1.0; 30];
        let x1 = cache.factor(&a).unwrap().solve(&b).unwrap();
        let a2 = a.scaled(2.0);
        let x2 = cache.factor(&a2).unwrap().solve(&b).unwrap();
        for (u, v) in x1.iter().zip(&x2) {
            assert!((u - 2.0 * v).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_rectangular() {
        let a = SparseMatrix::zeros(3, 4);
        assert!(SparseLu::new(&a).is_err());
    }
}
