//! Preconditioned Krylov solvers: CG for symmetric positive (semi)definite
//! systems and restarted GMRES for everything else.

use super::csr::{axpy, dot, norm2, SparseMatrix};
use super::LinalgError;

/// Outcome of an iterative solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// `‖b - A x‖ / ‖b‖`, recomputed from the returned iterate.
    pub residual: f64,
    pub converged: bool,
}

impl SolveReport {
    pub(crate) fn exact() -> Self {
        Self { iterations: 0, residual: 0.0, converged: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovParams {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for KrylovParams {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 5000 }
    }
}

/// Declared nullspace of a singular SPD operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Nullspace {
    #[default]
    None,
    /// The constant vector; iterates and the right-hand side are kept mean-zero.
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PreconditionerKind {
    Identity,
    Jacobi,
    #[default]
    Ilu0,
}

/// Anything that can compute `y = A x` for a square `A`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for SparseMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.spmv_into(x, y);
    }
}

pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(a: &SparseMatrix) -> Self {
        let inv_diag = a.diagonal().iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect();
        Self { inv_diag }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self { inv_diag: diag.iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect() }
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * di;
        }
    }
}

/// Incomplete LU with zero fill on the pattern of `A`.
pub struct Ilu0 {
    lu: SparseMatrix,
    diag_pos: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &SparseMatrix) -> Result<Self, LinalgError> {
        let n = a.nrows();
        let mut lu = a.clone();
        let indptr = lu.indptr().to_vec();
        let indices = lu.indices().to_vec();
        let mut diag_pos = vec![usize::MAX; n];
        for r in 0..n {
            for k in indptr[r]..indptr[r + 1] {
                if indices[k] == r {
                    diag_pos[r] = k;
                }
            }
            if diag_pos[r] == usize::MAX {
                return Err(LinalgError::ZeroPivot(r));
            }
        }
        let mut pos = vec![usize::MAX; n];
        let vals = lu.values_mut();
        for i in 0..n {
            for k in indptr[i]..indptr[i + 1] {
                pos[indices[k]] = k;
            }
            for kk in indptr[i]..indptr[i + 1] {
                let k = indices[kk];
                if k >= i {
                    break;
                }
                let pivot = vals[diag_pos[k]];
                if pivot == 0.0 {
                    return Err(LinalgError::ZeroPivot(k));
                }
                let lik = vals[kk] / pivot;
                vals[kk] = lik;
                for jj in (diag_pos[k] + 1)..indptr[k + 1] {
                    let p = pos[indices[jj]];
                    if p != usize::MAX {
                        vals[p] -= lik * vals[jj];
                    }
                }
            }
            for k in indptr[i]..indptr[i + 1] {
                pos[indices[k]] = usize::MAX;
            }
            if vals[diag_pos[i]] == 0.0 {
                return Err(LinalgError::ZeroPivot(i));
            }
        }
        Ok(Self { lu, diag_pos })
    }
}

impl Preconditioner for Ilu0 {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = r.len();
        let (ip, ix, v) = (self.lu.indptr(), self.lu.indices(), self.lu.values());
        for i in 0..n {
            let mut s = r[i];
            for k in ip[i]..self.diag_pos[i] {
                s -= v[k] * z[ix[k]];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in (self.diag_pos[i] + 1)..ip[i + 1] {
                s -= v[k] * z[ix[k]];
            }
            z[i] = s / v[self.diag_pos[i]];
        }
    }
}

fn make_preconditioner(a: &SparseMatrix, kind: PreconditionerKind) -> Box<dyn Preconditioner> {
    match kind {
        PreconditionerKind::Identity => Box::new(IdentityPreconditioner),
        PreconditionerKind::Jacobi => Box::new(Jacobi::new(a)),
        PreconditionerKind::Ilu0 => match Ilu0::new(a) {
            Ok(p) => Box::new(p),
            Err(e) => {
                log::debug!("ILU(0) unavailable ({e}); falling back to Jacobi");
                Box::new(Jacobi::new(a))
            }
        },
    }
}

fn check_square(a: &SparseMatrix, b: &[f64]) -> Result<(), LinalgError> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::ShapeMismatch { left: (a.nrows(), a.ncols()), right: (a.ncols(), 1) });
    }
    if b.len() != a.nrows() {
        return Err(LinalgError::DimensionMismatch { expected: a.nrows(), found: b.len() });
    }
    Ok(())
}

fn remove_mean(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

pub fn relative_residual(a: &dyn LinearOperator, x: &[f64], b: &[f64]) -> f64 {
    let mut r = vec![0.0; b.len()];
    a.apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let nb = norm2(b);
    if nb == 0.0 {
        norm2(&r)
    } else {
        norm2(&r) / nb
    }
}

/// Jacobi-preconditioned conjugate gradients.
///
/// With [`Nullspace::Constant`] the right-hand side is projected onto the
/// mean-zero subspace and the returned solution has zero (coefficient) mean.
pub fn solve_spd(
    a: &SparseMatrix,
    b: &[f64],
    params: KrylovParams,
    nullspace: Nullspace,
) -> Result<(Vec<f64>, SolveReport), LinalgError> {
    check_square(a, b)?;
    pcg(a, b, params, nullspace, &Jacobi::new(a))
}

/// Preconditioned CG on an abstract SPD operator.
pub fn pcg(
    a: &dyn LinearOperator,
    b: &[f64],
    params: KrylovParams,
    nullspace: Nullspace,
    pre: &dyn Preconditioner,
) -> Result<(Vec<f64>, SolveReport), LinalgError> {
    let n = b.len();
    if n != a.dim() {
        return Err(LinalgError::DimensionMismatch { expected: a.dim(), found: n });
    }
    let deflate = |v: &mut [f64]| {
        if nullspace == Nullspace::Constant {
            remove_mean(v);
        }
    };
    let mut rhs = b.to_vec();
    deflate(&mut rhs);
    let bnorm = norm2(&rhs);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, SolveReport::exact()));
    }
    let mut r = rhs.clone();
    let mut z = vec![0.0; n];
    pre.apply(&r, &mut z);
    deflate(&mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut iterations = 0;
    while iterations < params.max_iter {
        if norm2(&r) <= params.tol * bnorm * 0.5 {
            break;
        }
        iterations += 1;
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            break;
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        deflate(&mut r);
        pre.apply(&r, &mut z);
        deflate(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    deflate(&mut x);
    let residual = relative_residual(a, &x, &rhs);
    Ok((x, SolveReport { iterations, residual, converged: residual <= params.tol }))
}

/// Restarted GMRES(50) with right preconditioning.
pub fn solve_nonsymmetric(
    a: &SparseMatrix,
    b: &[f64],
    params: KrylovParams,
    preconditioner: PreconditionerKind,
) -> Result<(Vec<f64>, SolveReport), LinalgError> {
    check_square(a, b)?;
    let pre = make_preconditioner(a, preconditioner);
    gmres(a, b, None, params, 50, pre.as_ref())
}

/// GMRES(m) on `A x = b` starting from `x0`, with a caller-supplied preconditioner.
pub fn gmres(
    a: &dyn LinearOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    params: KrylovParams,
    restart: usize,
    pre: &dyn Preconditioner,
) -> Result<(Vec<f64>, SolveReport), LinalgError> {
    if b.len() != a.dim() {
        return Err(LinalgError::DimensionMismatch { expected: a.dim(), found: b.len() });
    }
    let n = b.len();
    let m = restart.max(1);
    let bnorm = norm2(b);
    let mut x = x0.map_or_else(|| vec![0.0; n], |v| v.to_vec());
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], SolveReport::exact()));
    }
    let mut iterations = 0;
    let mut v: Vec<Vec<f64>> = vec![vec![0.0; n]; m + 1];
    let mut h = vec![vec![0.0; m]; m + 1];
    let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
    let mut g = vec![0.0; m + 1];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut stagnant_cycles = 0;
    let mut last_res = f64::INFINITY;
    loop {
        let mut r = vec![0.0; n];
        a.apply(&x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let beta = norm2(&r);
        let rel = beta / bnorm;
        if rel <= params.tol || iterations >= params.max_iter {
            break;
        }
        if rel > 0.999 * last_res {
            stagnant_cycles += 1;
            if stagnant_cycles >= 3 {
                break;
            }
        } else {
            stagnant_cycles = 0;
        }
        last_res = rel;
        for (vi, ri) in v[0].iter_mut().zip(&r) {
            *vi = ri / beta;
        }
        g.iter_mut().for_each(|x| *x = 0.0);
        g[0] = beta;
        let mut k_used = 0;
        for j in 0..m {
            iterations += 1;
            k_used = j + 1;
            pre.apply(&v[j], &mut z);
            a.apply(&z, &mut w);
            for i in 0..=j {
                let hij = dot(&w, &v[i]);
                h[i][j] = hij;
                axpy(-hij, &v[i], &mut w);
            }
            let hn = norm2(&w);
            h[j + 1][j] = hn;
            if hn > 0.0 {
                for (vi, wi) in v[j + 1].iter_mut().zip(&w) {
                    *vi = wi / hn;
                }
            }
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let denom = (h[j][j] * h[j][j] + h[j + 1][j] * h[j + 1][j]).sqrt();
            if denom == 0.0 {
                cs[j] = 1.0;
                sn[j] = 0.0;
            } else {
                cs[j] = h[j][j] / denom;
                sn[j] = h[j + 1][j] / denom;
            }
            h[j][j] = cs[j] * h[j][j] + sn[j] * h[j + 1][j];
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            if g[j + 1].abs() <= params.tol * bnorm * 0.5 || hn == 0.0 || iterations >= params.max_iter {
                break;
            }
        }
        // Back substitution on the k_used x k_used triangle.
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for l in (i + 1)..k_used {
                s -= h[i][l] * y[l];
            }
            y[i] = if h[i][i] != 0.0 { s / h[i][i] } else { 0.0 };
        }
        let mut update = vec![0.0; n];
        for (i, yi) in y.iter().enumerate() {
            axpy(*yi, &v[i], &mut update);
        }
        pre.apply(&update, &mut z);
        axpy(1.0, &z, &mut x);
        if x.iter().any(|v| !v.is_finite()) {
            break;
        }
    }
    let residual = relative_residual(a, &x, b);
    Ok((x, SolveReport { iterations, residual, converged: residual <= params.tol }))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::linalg::csr::TripletBuilder;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Gaussian elimination with partial pivoting; independent of every solver under test.
    pub(crate) fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for row in (col + 1)..n {
                let f = a[row][col] / a[col][col];
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        x
    }

    #[test]
    fn diagonal_spd_system() {
        let d: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let a = SparseMatrix::from_diagonal(&d);
        let (x, rep) = solve_spd(&a, &[1.0; 10], KrylovParams { tol: 1e-12, max_iter: 100 }, Nullspace::None).unwrap();
        assert!(rep.converged);
        for (i, xi) in x.iter().enumerate() {
            assert!((xi - 1.0 / (i + 1) as f64).abs() < 1e-12);
        }
    }

    fn laplacian_1d_neumann(n: usize) -> SparseMatrix {
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n - 1 {
            b.push(i, i, 1.0);
            b.push(i + 1, i + 1, 1.0);
            b.push(i, i + 1, -1.0);
            b.push(i + 1, i, -1.0);
        }
        b.build()
    }

    #[test]
    fn constant_nullspace_gives_mean_zero_solution() {
        let a = laplacian_1d_neumann(40);
        let mut rhs: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).sin()).collect();
        let m = rhs.iter().sum::<f64>() / 40.0;
        rhs.iter_mut().for_each(|v| *v -= m);
        let (x, rep) = solve_spd(&a, &rhs, KrylovParams { tol: 1e-12, max_iter: 500 }, Nullspace::Constant).unwrap();
        assert!(rep.converged, "{rep:?}");
        assert!(x.iter().sum::<f64>().abs() / 40.0 < 1e-10);
    }

    #[test]
    fn gmres_matches_dense_solve_on_shifted_nilpotent() {
        let n = 30;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut b = TripletBuilder::new(n, n);
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            b.push(i, i, 1.0);
            dense[i][i] = 1.0;
            if i + 1 < n {
                b.push(i, i + 1, 1.0);
                dense[i][i + 1] = 1.0;
            }
        }
        let a = b.build();
        let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (x, rep) =
            solve_nonsymmetric(&a, &rhs, KrylovParams { tol: 1e-13, max_iter: 200 }, PreconditionerKind::Identity)
                .unwrap();
        assert!(rep.converged, "{rep:?}");
        let oracle = dense_solve(dense, rhs);
        for (xi, oi) in x.iter().zip(&oracle) {
            assert!((xi - oi).abs() < 1e-10);
        }
    }

    #[test]
    fn gmres_agrees_with_cg_on_symmetric_system() {
        let n = 25;
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.push(i, i, 2.5);
            if i + 1 < n {
                b.push(i, i + 1, -1.0);
                b.push(i + 1, i, -1.0);
            }
        }
        let a = b.build();
        let rhs: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 * 0.1).collect();
        let tol = 1e-10;
        let p = KrylovParams { tol, max_iter: 500 };
        let (x1, r1) = solve_spd(&a, &rhs, p, Nullspace::None).unwrap();
        let (x2, r2) = solve_nonsymmetric(&a, &rhs, p, PreconditionerKind::Ilu0).unwrap();
        assert!(r1.converged && r2.converged);
        let scale = norm2(&x1);
        let diff: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a - b).collect();
        assert!(norm2(&diff) <= 2.0 * tol * scale * 10.0);
    }

    #[test]
    fn ilu0_is_exact_for_tridiagonal() {
        // No fill occurs for tridiagonal matrices, so ILU(0) is the exact LU.
        let n = 12;
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.push(i, i, 3.0);
            if i + 1 < n {
                b.push(i, i + 1, -1.0);
                b.push(i + 1, i, -0.5);
            }
        }
        let a = b.build();
        let ilu = Ilu0::new(&a).unwrap();
        let rhs: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let mut z = vec![0.0; n];
        ilu.apply(&rhs, &mut z);
        assert!(relative_residual(&a, &z, &rhs) < 1e-14);
    }

    #[test]
    fn non_convergence_is_reported_not_raised() {
        let a = laplacian_1d_neumann(50);
        let mut rhs = vec![0.0; 50];
        rhs[0] = 1.0;
        rhs[49] = -1.0;
        let (_, rep) =
            solve_nonsymmetric(&a, &rhs, KrylovParams { tol: 1e-14, max_iter: 3 }, PreconditionerKind::Identity)
                .unwrap();
        assert!(!rep.converged);
        assert!(rep.residual > 1e-14);
    }
}
