//! Solver for the block system `[A Bᵀ; B 0] [u; p] = [f; g]`.
//!
//! The pressure is fixed by a weighted mean constraint `mᵀp = 0`. Passing the
//! pressure mass matrix as `pressure_mass` makes `m = M_p 1`, so the pressure
//! has zero integral; otherwise `m` is the all-ones vector. A Lagrange
//! multiplier on the constraint absorbs any incompatibility of `g` with the
//! constant mode.

use super::csr::{norm2, SparseMatrix, TripletBuilder};
use super::direct::{LuCache, SparseLu};
use super::krylov::{gmres, Jacobi, KrylovParams, LinearOperator, SolveReport};
use super::LinalgError;

/// Below this many unknowns the block system is always factored directly.
pub const DIRECT_FALLBACK_SIZE: usize = 3000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SaddleMethod {
    /// Sparse LU of the block matrix with one pinned pressure.
    #[default]
    Direct,
    /// GMRES on the pressure Schur complement, preconditioned by the pressure mass diagonal.
    Schur,
}

#[derive(Debug, Clone)]
pub struct SaddleSolution {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub report: SolveReport,
}

fn gauge_vector(np: usize, pressure_mass: Option<&SparseMatrix>) -> Vec<f64> {
    match pressure_mass {
        Some(mp) => mp.spmv(&vec![1.0; np]).unwrap_or_else(|_| vec![1.0; np]),
        None => vec![1.0; np],
    }
}

fn check_shapes(a: &SparseMatrix, b: &SparseMatrix, f: &[f64], g: &[f64]) -> Result<(), LinalgError> {
    let nu = a.nrows();
    if a.ncols() != nu {
        return Err(LinalgError::ShapeMismatch { left: (a.nrows(), a.ncols()), right: (nu, nu) });
    }
    if b.ncols() != nu {
        return Err(LinalgError::ShapeMismatch { left: (b.nrows(), b.ncols()), right: (b.nrows(), nu) });
    }
    if f.len() != nu {
        return Err(LinalgError::DimensionMismatch { expected: nu, found: f.len() });
    }
    if g.len() != b.nrows() {
        return Err(LinalgError::DimensionMismatch { expected: b.nrows(), found: g.len() });
    }
    Ok(())
}

/// Assembles `[A Bᵀ; B E]` where `E` holds a single unit diagonal entry at
/// pressure `pin`, which removes the constant pressure mode without a dense
/// border row.
pub fn pinned_matrix(a: &SparseMatrix, b: &SparseMatrix, pin: usize) -> SparseMatrix {
    let nu = a.nrows();
    let np = b.nrows();
    let n = nu + np;
    let mut t = TripletBuilder::with_capacity(n, n, a.nnz() + 2 * b.nnz() + 1);
    for r in 0..nu {
        for (c, v) in a.row(r) {
            t.push(r, c, v);
        }
    }
    for r in 0..np {
        for (c, v) in b.row(r) {
            t.push(nu + r, c, v);
            t.push(c, nu + r, v);
        }
    }
    t.push(nu + pin, nu + pin, 1.0);
    t.build()
}

/// Combines two solves of a pinned system into the solution of the system
/// bordered by the gauge `m`: `x₁` answers the data, `x₂` the right-hand side
/// `(0, m)`. Returns `λ`; `x₁` is overwritten with `x₁ − λ x₂`.
pub fn combine_pinned(x1: &mut [f64], x2: &[f64], pin_index: usize) -> f64 {
    let lambda = x1[pin_index] / x2[pin_index];
    x1.iter_mut().zip(x2).for_each(|(a, b)| *a -= lambda * b);
    lambda
}

/// Shifts `p` by a constant so that `mᵀp = 0`.
pub fn remove_gauge_mean(p: &mut [f64], gauge: &[f64]) {
    let total: f64 = gauge.iter().sum();
    let shift = p.iter().zip(gauge).map(|(a, b)| a * b).sum::<f64>() / total;
    p.iter_mut().for_each(|v| *v -= shift);
}

fn full_residual(a: &SparseMatrix, b: &SparseMatrix, u: &[f64], p: &[f64], f: &[f64], g: &[f64], lambda: f64, gauge: &[f64]) -> f64 {
    let mut r1 = a.spmv(u).expect("shapes checked");
    let btp = b.spmv_transpose(p).expect("shapes checked");
    for i in 0..r1.len() {
        r1[i] += btp[i] - f[i];
    }
    let mut r2 = b.spmv(u).expect("shapes checked");
    for i in 0..r2.len() {
        r2[i] += lambda * gauge[i] - g[i];
    }
    let scale = (norm2(f).powi(2) + norm2(g).powi(2)).sqrt();
    let r = (norm2(&r1).powi(2) + norm2(&r2).powi(2)).sqrt();
    if scale == 0.0 {
        r
    } else {
        r / scale
    }
}

/// Reusable saddle solver; the direct path keeps its symbolic factorization
/// between calls with an unchanged sparsity pattern.
#[derive(Default)]
pub struct SaddleSolver {
    pub method: SaddleMethod,
    pub params: KrylovParams,
    cache: LuCache,
}

impl SaddleSolver {
    pub fn new(method: SaddleMethod, params: KrylovParams) -> Self {
        Self { method, params, cache: LuCache::new() }
    }

    pub fn solve(
        &mut self,
        a: &SparseMatrix,
        b: &SparseMatrix,
        f: &[f64],
        g: &[f64],
        pressure_mass: Option<&SparseMatrix>,
    ) -> Result<SaddleSolution, LinalgError> {
        check_shapes(a, b, f, g)?;
        let gauge = gauge_vector(b.nrows(), pressure_mass);
        let small = a.nrows() + b.nrows() < DIRECT_FALLBACK_SIZE;
        if self.method == SaddleMethod::Direct || small {
            self.solve_direct(a, b, f, g, &gauge)
        } else {
            self.solve_schur(a, b, f, g, &gauge)
        }
    }

    fn solve_direct(&mut self, a: &SparseMatrix, b: &SparseMatrix, f: &[f64], g: &[f64], gauge: &[f64]) -> Result<SaddleSolution, LinalgError> {
        let nu = a.nrows();
        let k = pinned_matrix(a, b, 0);
        let lu = self.cache.factor(&k)?;
        let mut x = [f, g].concat();
        lu.solve_in_place(&mut x)?;
        let mut x2 = vec![0.0; nu];
        x2.extend_from_slice(gauge);
        lu.solve_in_place(&mut x2)?;
        let lambda = combine_pinned(&mut x, &x2, nu);
        let mut p = x.split_off(nu);
        remove_gauge_mean(&mut p, gauge);
        let residual = full_residual(a, b, &x, &p, f, g, lambda, gauge);
        let report = SolveReport { iterations: 1, residual, converged: residual <= self.params.tol };
        Ok(SaddleSolution { u: x, p, report })
    }

    fn solve_schur(&mut self, a: &SparseMatrix, b: &SparseMatrix, f: &[f64], g: &[f64], gauge: &[f64]) -> Result<SaddleSolution, LinalgError> {
        let np = b.nrows();
        let lu = self.cache.factor(a)?;
        let schur = Schur { a: &lu, b, gauge };
        // rhs = B A⁻¹ f - g, projected off the gauge direction.
        let ainv_f = lu.solve(f)?;
        let mut rhs = b.spmv(&ainv_f)?;
        for (r, gi) in rhs.iter_mut().zip(g) {
            *r -= gi;
        }
        let lambda_num: f64 = rhs.iter().sum::<f64>();
        let lambda_den: f64 = gauge.iter().sum::<f64>();
        let lambda = -lambda_num / lambda_den;
        for (r, m) in rhs.iter_mut().zip(gauge) {
            *r += lambda * m;
        }
        let pre = Jacobi::from_diagonal(gauge);
        let (mut p, mut report) = gmres(&schur, &rhs, None, self.params, 60, &pre)?;
        let shift = p.iter().zip(gauge).map(|(a, b)| a * b).sum::<f64>() / lambda_den;
        p.iter_mut().for_each(|v| *v -= shift);
        let mut rhs_u = f.to_vec();
        let btp = b.spmv_transpose(&p)?;
        for (r, v) in rhs_u.iter_mut().zip(&btp) {
            *r -= v;
        }
        let u = lu.solve(&rhs_u)?;
        report.residual = full_residual(a, b, &u, &p, f, g, lambda, gauge);
        report.converged = report.residual <= self.params.tol * 10.0 && report.converged;
        debug_assert_eq!(p.len(), np);
        Ok(SaddleSolution { u, p, report })
    }
}

struct Schur<'a> {
    a: &'a SparseLu,
    b: &'a SparseMatrix,
    gauge: &'a [f64],
}

impl LinearOperator for Schur<'_> {
    fn dim(&self) -> usize {
        self.b.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let btx = self.b.spmv_transpose(x).expect("shapes checked");
        let w = self.a.solve(&btx).expect("factor checked");
        self.b.spmv_into(&w, y);
        // Pin the constant mode so the operator is nonsingular.
        let mx: f64 = x.iter().zip(self.gauge).map(|(a, b)| a * b).sum();
        let total: f64 = self.gauge.iter().sum();
        for (yi, m) in y.iter_mut().zip(self.gauge) {
            *yi += mx * m / total;
        }
    }
}

/// One-shot convenience wrapper around [`SaddleSolver`].
pub fn solve_saddle(
    a: &SparseMatrix,
    b: &SparseMatrix,
    f: &[f64],
    g: &[f64],
    params: KrylovParams,
    pressure_mass: Option<&SparseMatrix>,
) -> Result<SaddleSolution, LinalgError> {
    SaddleSolver::new(SaddleMethod::Direct, params).solve(a, b, f, g, pressure_mass)
}
