use std::sync::Arc;

use super::{Nudging, Problem, SchemeConfig, SchemeError, SchemeKind, SolverBackend, SolverSettings, State};
use crate::fem::assembly::{
    assemble_divergence, assemble_graddiv, block_diag2, scalar_convection, scalar_p1_mass, scalar_p1_stiffness,
    scalar_p2_mass, scalar_p2_stiffness, ConvectionForm,
};
use crate::fem::{apply_dirichlet, lift_rhs, DirichletBc, DofMap, Field, FieldKind};
use crate::linalg::{
    combine_pinned, gmres, pinned_matrix, remove_gauge_mean, norm2, pcg, Ilu0, Jacobi, KrylovParams, LinalgError, LinearOperator, LuCache, Nullspace,
    SaddleMethod, SaddleSolver, SolveReport, SparseLu, SparseMatrix,
};
use crate::truth::MeasurementSource;

enum Factor {
    Lu(SparseLu),
    Ilu(Ilu0),
}

/// Factor-then-solve wrapper that enforces the residual tolerance.
pub struct LinearSolver {
    pub settings: SolverSettings,
    cache: LuCache,
}

impl LinearSolver {
    pub fn new(settings: SolverSettings) -> Self {
        Self { settings, cache: LuCache::new() }
    }

    fn factor(&mut self, a: &SparseMatrix) -> Result<Factor, LinalgError> {
        Ok(match self.settings.backend {
            SolverBackend::Direct => Factor::Lu(self.cache.factor(a)?),
            SolverBackend::Iterative => Factor::Ilu(Ilu0::new(a)?),
        })
    }

    fn solve_with(&self, a: &SparseMatrix, f: &Factor, b: &[f64], x0: Option<&[f64]>) -> Result<(Vec<f64>, SolveReport), LinalgError> {
        let params = KrylovParams { tol: self.settings.tol, max_iter: self.settings.max_iter };
        match f {
            Factor::Lu(lu) => lu_refined(a, lu, b, self.settings.tol),
            Factor::Ilu(ilu) => gmres(a, b, x0, params, 50, ilu),
        }
    }

    /// Factors `a` and solves one right-hand side.
    pub fn solve(&mut self, a: &SparseMatrix, b: &[f64], x0: Option<&[f64]>) -> Result<(Vec<f64>, SolveReport), LinalgError> {
        let f = self.factor(a)?;
        self.solve_with(a, &f, b, x0)
    }
}

/// LU solve followed by up to three steps of iterative refinement.
fn lu_refined(a: &SparseMatrix, lu: &SparseLu, b: &[f64], tol: f64) -> Result<(Vec<f64>, SolveReport), LinalgError> {
    let nb = norm2(b);
    if nb == 0.0 {
        return Ok((vec![0.0; b.len()], SolveReport { iterations: 0, residual: 0.0, converged: true }));
    }
    let mut x = lu.solve(b)?;
    let mut r = vec![0.0; b.len()];
    let mut iterations = 1;
    let residual = loop {
        a.apply(&x, &mut r);
        r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
        let res = norm2(&r) / nb;
        if res <= 1e-3 * tol || iterations > 3 {
            break res;
        }
        lu.solve_in_place(&mut r)?;
        x.iter_mut().zip(&r).for_each(|(xi, di)| *xi += di);
        iterations += 1;
    };
    Ok((x, SolveReport { iterations, residual, converged: residual <= tol }))
}

struct NudgeData {
    /// `μ J` on one velocity component.
    js: SparseMatrix,
    source: Arc<MeasurementSource>,
}

/// Discrete L2 projection onto weakly divergence-free fields with fixed boundary values.
enum Projector {
    Direct { kkt: SparseMatrix, constrained: SparseMatrix, lu: SparseLu },
    Schur { mass: SparseMatrix, b_int: SparseMatrix, pre: Jacobi },
}

/// Precomputed operators and solver state of one simulation.
pub struct Stepper {
    pub cfg: SchemeConfig,
    pub problem: Problem,
    nudge: Option<NudgeData>,
    m2: SparseMatrix,
    k2: SparseMatrix,
    mv: SparseMatrix,
    kv: SparseMatrix,
    b: SparseMatrix,
    mp: SparseMatrix,
    gauge: Vec<f64>,
    graddiv: Option<SparseMatrix>,
    projector: Option<Projector>,
    projection_dofs: Vec<usize>,
    mp_lu: Option<SparseLu>,
    scalar_solver: LinearSolver,
    vector_solver: LinearSolver,
    saddle: SaddleSolver,
}

impl std::fmt::Debug for Stepper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stepper").field("cfg", &self.cfg).finish_non_exhaustive()
    }
}

impl Stepper {
    pub fn new(cfg: SchemeConfig, problem: Problem, nudge: Option<&Nudging>) -> Result<Self, SchemeError> {
        cfg.validate()?;
        let space = problem.space.clone();
        let m2 = scalar_p2_mass(&space);
        let k2 = scalar_p2_stiffness(&space);
        let mv = block_diag2(&m2);
        let kv = block_diag2(&k2);
        let b = assemble_divergence(&space);
        let mp = scalar_p1_mass(&space);
        let gauge = mp.spmv(&vec![1.0; mp.nrows()]).expect("square");
        let nudge = match nudge {
            Some(n) if n.mu > 0.0 => {
                Some(NudgeData { js: n.interpolant.scalar_nudging_matrix(&space).scaled(n.mu), source: n.source.clone() })
            }
            _ => None,
        };
        let graddiv = cfg.kind.is_penalty().then(|| assemble_graddiv(&space));
        let mp_lu = match (cfg.kind.is_penalty(), cfg.solver.backend) {
            (true, SolverBackend::Direct) => Some(SparseLu::new(&mp).map_err(|e| SchemeError::Linalg { step: 0, what: "pressure mass", source: e })?),
            _ => None,
        };
        let mut st = Self {
            cfg,
            problem,
            nudge,
            m2,
            k2,
            mv,
            kv,
            b,
            mp,
            gauge,
            graddiv,
            projector: None,
            projection_dofs: space.normal_velocity_dofs(),
            mp_lu,
            scalar_solver: LinearSolver::new(cfg.solver),
            vector_solver: LinearSolver::new(cfg.solver),
            saddle: SaddleSolver::new(
                match cfg.solver.backend {
                    SolverBackend::Direct => SaddleMethod::Direct,
                    SolverBackend::Iterative => SaddleMethod::Schur,
                },
                KrylovParams { tol: cfg.solver.tol, max_iter: cfg.solver.max_iter },
            ),
        };
        if cfg.kind.is_projection() {
            st.projector = Some(st.build_projector()?);
        }
        Ok(st)
    }

    pub fn space(&self) -> &Arc<DofMap> {
        &self.problem.space
    }

    /// Dofs of `u` that the projection keeps: the normal component on the boundary.
    fn projection_bc(&self, u: &[f64]) -> Result<DirichletBc, SchemeError> {
        Ok(DirichletBc::new(self.projection_dofs.iter().map(|&d| (d, u[d])))?)
    }

    fn build_projector(&self) -> Result<Projector, SchemeError> {
        let bc = self.projection_bc(&vec![0.0; self.mv.nrows()])?;
        let lin = |e| SchemeError::Linalg { step: 0, what: "projection setup", source: e };
        match self.cfg.solver.backend {
            SolverBackend::Direct => {
                let kkt = pinned_matrix(&self.mv, &self.b.scaled(-1.0), 0);
                let n = kkt.nrows();
                let (constrained, _) = apply_dirichlet(&kkt, &vec![0.0; n], &bc)?;
                let lu = SparseLu::new(&constrained).map_err(lin)?;
                Ok(Projector::Direct { kkt, constrained, lu })
            }
            SolverBackend::Iterative => {
                let nv = self.mv.nrows();
                let (mass, _) = apply_dirichlet(&self.mv, &vec![0.0; nv], &bc)?;
                let b_int = zero_columns(&self.b, &bc);
                let pre = Jacobi::new(&scalar_p1_stiffness(&self.problem.space));
                Ok(Projector::Schur { mass, b_int, pre })
            }
        }
    }

    fn measurement(&self, step: usize, t: f64) -> Result<Option<(&NudgeData, Vec<f64>)>, SchemeError> {
        match &self.nudge {
            None => Ok(None),
            Some(n) => {
                let w = n.source.sample_coeffs(&self.problem.space, t).map_err(|e| SchemeError::Truth { step, source: e })?;
                Ok(Some((n, w)))
            }
        }
    }

    /// Advances by one step. Second-order schemes take a first-order step
    /// when no history level is available yet.
    pub fn step(&mut self, state: &State) -> Result<State, SchemeError> {
        let bdf2 = self.cfg.kind.is_bdf2() && state.u_prev.is_some();
        match self.cfg.kind.first_order() {
            SchemeKind::ProjBE => {
                let u = self.proj_step1(state, bdf2)?;
                let (u_tilde, q) = self.proj_step2(&u, state.step + 1)?;
                let dt_eff = self.cfg.dt / alpha(bdf2);
                let mut p: Vec<f64> = q.iter().map(|v| v / dt_eff).collect();
                if bdf2 {
                    p.iter_mut().zip(state.p.coeffs()).for_each(|(a, b)| *a += b);
                }
                self.next_state(state, u.clone(), u_tilde, p, state.u_tilde.clone())
            }
            SchemeKind::PenaltyBE => {
                let (u, p) = self.penalty_step(state, bdf2)?;
                self.next_state(state, u.clone(), u, p, state.u.clone())
            }
            _ => {
                let (u, p) = self.coupled_step(state, bdf2)?;
                self.next_state(state, u.clone(), u, p, state.u.clone())
            }
        }
    }

    fn next_state(&self, prev: &State, u: Vec<f64>, ut: Vec<f64>, p: Vec<f64>, hist: Field) -> Result<State, SchemeError> {
        let sp = self.problem.space.clone();
        Ok(State {
            step: prev.step + 1,
            time: (prev.step + 1) as f64 * self.cfg.dt,
            u: Field::from_coeffs(sp.clone(), FieldKind::Velocity, u)?,
            u_tilde: Field::from_coeffs(sp.clone(), FieldKind::Velocity, ut)?,
            u_prev: self.cfg.kind.is_bdf2().then_some(hist),
            p: Field::from_coeffs(sp, FieldKind::Pressure, p)?,
        })
    }

    /// `(history term, advector)` for the time derivative: `M·hist` goes to the right-hand side.
    fn history(&self, cur: &Field, prev: Option<&Field>, bdf2: bool) -> (Vec<f64>, Vec<f64>) {
        let dt = self.cfg.dt;
        match (bdf2, prev) {
            (true, Some(pr)) => {
                let c = cur.coeffs();
                let o = pr.coeffs();
                let hist = c.iter().zip(o).map(|(a, b)| (4.0 * a - b) / (2.0 * dt)).collect();
                let adv = c.iter().zip(o).map(|(a, b)| 2.0 * a - b).collect();
                (hist, adv)
            }
            _ => (cur.coeffs().iter().map(|a| a / dt).collect(), cur.coeffs().to_vec()),
        }
    }

    /// Convection-diffusion-nudging substep of the projection schemes; returns `u^{n+1}`.
    pub fn proj_step1(&mut self, state: &State, bdf2: bool) -> Result<Vec<f64>, SchemeError> {
        let step = state.step + 1;
        let t = step as f64 * self.cfg.dt;
        let nn = self.problem.space.num_nodes();
        let (hist, adv) = self.history(&state.u_tilde, state.u_prev.as_ref(), bdf2);
        let conv = scalar_convection(&self.problem.space, &adv, ConvectionForm::Plain)?;
        let a0 = alpha(bdf2) / self.cfg.dt;
        let meas = self.measurement(step, t)?;
        let mut terms: Vec<(f64, &SparseMatrix)> = vec![(a0, &self.m2), (1.0, &conv), (self.cfg.nu, &self.k2)];
        if let Some((n, _)) = &meas {
            terms.push((1.0, &n.js));
        }
        let a = SparseMatrix::linear_combination(&terms).map_err(|e| SchemeError::Linalg { step, what: "step 1 assembly", source: e })?;
        let load = self.problem.load(t);
        let grad_p = if bdf2 { Some(self.b.spmv_transpose(state.p.coeffs()).expect("shape")) } else { None };
        let bcs = self.problem.scalar_bcs(t);
        let mut rhs = Vec::with_capacity(2);
        for c in 0..2 {
            let r = c * nn..(c + 1) * nn;
            let mut f = self.m2.spmv(&hist[r.clone()]).expect("shape");
            f.iter_mut().zip(&load[r.clone()]).for_each(|(a, b)| *a += b);
            if let Some((n, w)) = &meas {
                let jw = n.js.spmv(&w[r.clone()]).expect("shape");
                f.iter_mut().zip(&jw).for_each(|(a, b)| *a += b);
            }
            if let Some(g) = &grad_p {
                f.iter_mut().zip(&g[r.clone()]).for_each(|(a, b)| *a += b);
            }
            rhs.push(f);
        }
        let (ac, f0) = apply_dirichlet(&a, &rhs[0], &bcs[0])?;
        let mut f1 = rhs.pop().expect("two components");
        lift_rhs(&a, &mut f1, &bcs[1])?;
        let lin = |e| SchemeError::Linalg { step, what: "step 1", source: e };
        let factor = self.scalar_solver.factor(&ac).map_err(lin)?;
        let mut u = Vec::with_capacity(2 * nn);
        for (c, f) in [f0, f1].iter().enumerate() {
            let x0 = &state.u.coeffs()[c * nn..(c + 1) * nn];
            let (x, rep) = self.scalar_solver.solve_with(&ac, &factor, f, Some(x0)).map_err(lin)?;
            check(step, "step 1", rep)?;
            u.extend(x);
        }
        Ok(u)
    }

    /// L2 projection of `u` onto weakly divergence-free fields with the same
    /// normal boundary component; the tangential component is free. Returns
    /// `(ũ, q)` with `M(ũ − u) = Bᵀq` on the free dofs and `(q, 1) = 0`.
    pub fn proj_step2(&mut self, u: &[f64], step: usize) -> Result<(Vec<f64>, Vec<f64>), SchemeError> {
        self.problem.check_len(u)?;
        if self.projector.is_none() {
            self.projector = Some(self.build_projector()?);
        }
        let nv = u.len();
        let np = self.b.nrows();
        let bc = self.projection_bc(u)?;
        let tol = self.cfg.solver.tol;
        match self.projector.as_ref().expect("built above") {
            Projector::Direct { kkt, constrained, lu } => {
                let mut rhs = self.mv.spmv(u).expect("shape");
                rhs.resize(nv + np, 0.0);
                lift_rhs(kkt, &mut rhs, &bc)?;
                let lin = |e| SchemeError::Linalg { step, what: "projection", source: e };
                let mut x = lu.solve(&rhs).map_err(lin)?;
                let mut r2 = vec![0.0; nv];
                r2.extend_from_slice(&self.gauge);
                let x2 = lu.solve(&r2).map_err(lin)?;
                let lambda = combine_pinned(&mut x, &x2, nv);
                rhs.iter_mut().zip(&r2).for_each(|(a, b)| *a -= lambda * b);
                let res = crate::linalg::relative_residual(constrained, &x, &rhs);
                if res > tol {
                    return Err(SchemeError::NotConverged { step, what: "projection", residual: res });
                }
                let mut q = x.split_off(nv);
                remove_gauge_mean(&mut q, &self.gauge);
                Ok((x, q))
            }
            Projector::Schur { mass, b_int, pre } => {
                let params = KrylovParams { tol, max_iter: self.cfg.solver.max_iter };
                let inner = KrylovParams { tol: tol * 1e-2, max_iter: self.cfg.solver.max_iter };
                let mass_pre = Jacobi::new(mass);
                let op = SchurOp { mass, b_int, pre: &mass_pre, params: inner };
                let bu = self.b.spmv(u).expect("shape");
                let lambda = bu.iter().sum::<f64>() / self.gauge.iter().sum::<f64>();
                let r: Vec<f64> = bu.iter().zip(&self.gauge).map(|(b, m)| lambda * m - b).collect();
                let lin = |e| SchemeError::Linalg { step, what: "projection", source: e };
                let (mut q, rep) = pcg(&op, &r, params, Nullspace::Constant, pre).map_err(lin)?;
                check(step, "projection", rep)?;
                remove_gauge_mean(&mut q, &self.gauge);
                let corr = op.mass_solve(&b_int.spmv_transpose(&q).expect("shape")).map_err(lin)?;
                let ut = u.iter().zip(&corr).map(|(a, b)| a + b).collect();
                Ok((ut, q))
            }
        }
    }

    fn velocity_matrix(&self, step: usize, a0: f64, adv: &[f64], penalty: bool) -> Result<SparseMatrix, SchemeError> {
        let conv = block_diag2(&scalar_convection(&self.problem.space, adv, ConvectionForm::Skew)?);
        let mut terms: Vec<(f64, &SparseMatrix)> = vec![(a0, &self.mv), (1.0, &conv), (self.cfg.nu, &self.kv)];
        if penalty {
            terms.push((1.0 / self.cfg.eps, self.graddiv.as_ref().expect("penalty scheme")));
        }
        let jv;
        if let Some(n) = &self.nudge {
            jv = block_diag2(&n.js);
            terms.push((1.0, &jv));
        }
        SparseMatrix::linear_combination(&terms).map_err(|e| SchemeError::Linalg { step, what: "assembly", source: e })
    }

    fn velocity_rhs(&self, step: usize, t: f64, hist: &[f64]) -> Result<Vec<f64>, SchemeError> {
        let mut f = self.mv.spmv(hist).expect("shape");
        let load = self.problem.load(t);
        f.iter_mut().zip(&load).for_each(|(a, b)| *a += b);
        if let Some((n, w)) = self.measurement(step, t)? {
            let nn = self.problem.space.num_nodes();
            for c in 0..2 {
                let jw = n.js.spmv(&w[c * nn..(c + 1) * nn]).expect("shape");
                f[c * nn..(c + 1) * nn].iter_mut().zip(&jw).for_each(|(a, b)| *a += b);
            }
        }
        Ok(f)
    }

    /// Velocity-only penalty step; the pressure solves `M_p p = −ε⁻¹ B u`.
    pub fn penalty_step(&mut self, state: &State, bdf2: bool) -> Result<(Vec<f64>, Vec<f64>), SchemeError> {
        let step = state.step + 1;
        let t = step as f64 * self.cfg.dt;
        let (hist, adv) = self.history(&state.u, state.u_prev.as_ref(), bdf2);
        let a = self.velocity_matrix(step, alpha(bdf2) / self.cfg.dt, &adv, true)?;
        let f = self.velocity_rhs(step, t, &hist)?;
        let (ac, fc) = apply_dirichlet(&a, &f, &self.problem.velocity_bc(t))?;
        let lin = |e| SchemeError::Linalg { step, what: "penalty solve", source: e };
        let (u, rep) = self.vector_solver.solve(&ac, &fc, Some(state.u.coeffs())).map_err(lin)?;
        check(step, "penalty solve", rep)?;
        let div: Vec<f64> = self.b.spmv(&u).expect("shape").iter().map(|v| -v / self.cfg.eps).collect();
        let p = match &self.mp_lu {
            Some(lu) => lu_refined(&self.mp, lu, &div, self.cfg.solver.tol),
            None => {
                let params = KrylovParams { tol: self.cfg.solver.tol, max_iter: self.cfg.solver.max_iter };
                pcg(&self.mp, &div, params, Nullspace::None, &Jacobi::new(&self.mp))
            }
        };
        let (p, rep) = p.map_err(|e| SchemeError::Linalg { step, what: "pressure recovery", source: e })?;
        check(step, "pressure recovery", rep)?;
        Ok((u, p))
    }

    /// Coupled velocity-pressure step with mean-zero pressure.
    pub fn coupled_step(&mut self, state: &State, bdf2: bool) -> Result<(Vec<f64>, Vec<f64>), SchemeError> {
        let step = state.step + 1;
        let t = step as f64 * self.cfg.dt;
        let (hist, adv) = self.history(&state.u, state.u_prev.as_ref(), bdf2);
        let a = self.velocity_matrix(step, alpha(bdf2) / self.cfg.dt, &adv, false)?;
        let f = self.velocity_rhs(step, t, &hist)?;
        let bc = self.problem.velocity_bc(t);
        let (ac, fc) = apply_dirichlet(&a, &f, &bc)?;
        let mut bd = vec![0.0; self.b.ncols()];
        bc.impose(&mut bd);
        let g = self.b.spmv(&bd).expect("shape");
        let neg_b = zero_columns(&self.b, &bc).scaled(-1.0);
        let sol = self
            .saddle
            .solve(&ac, &neg_b, &fc, &g, Some(&self.mp))
            .map_err(|e| SchemeError::Linalg { step, what: "coupled solve", source: e })?;
        check(step, "coupled solve", sol.report)?;
        Ok((sol.u, sol.p))
    }
}

fn alpha(bdf2: bool) -> f64 {
    if bdf2 {
        1.5
    } else {
        1.0
    }
}

fn check(step: usize, what: &'static str, rep: SolveReport) -> Result<(), SchemeError> {
    if rep.converged {
        Ok(())
    } else {
        Err(SchemeError::NotConverged { step, what, residual: rep.residual })
    }
}

/// Copy of `b` with the entries in constrained columns set to zero.
fn zero_columns(b: &SparseMatrix, bc: &DirichletBc) -> SparseMatrix {
    let mask = bc.mask(b.ncols());
    let mut out = b.clone();
    let idx = b.indices().to_vec();
    for (v, c) in out.values_mut().iter_mut().zip(&idx) {
        if mask[*c].is_some() {
            *v = 0.0;
        }
    }
    out
}

/// `q ↦ B_I M_I⁻¹ B_Iᵀ q`.
struct SchurOp<'a> {
    mass: &'a SparseMatrix,
    b_int: &'a SparseMatrix,
    pre: &'a Jacobi,
    params: KrylovParams,
}

impl SchurOp<'_> {
    fn mass_solve(&self, r: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let (x, rep) = pcg(self.mass, r, self.params, Nullspace::None, self.pre)?;
        if !rep.converged {
            return Err(LinalgError::Factorization(format!("inner mass solve stalled at residual {:.3e}", rep.residual)));
        }
        Ok(x)
    }
}

impl LinearOperator for SchurOp<'_> {
    fn dim(&self) -> usize {
        self.b_int.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let bt = self.b_int.spmv_transpose(x).expect("shape");
        let z = self.mass_solve(&bt).unwrap_or_else(|_| vec![f64::NAN; bt.len()]);
        self.b_int.spmv_into(&z, y);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cda::{build_interpolant, InterpolantMode};
    use crate::mesh::{unit_square_mesh, CoarseGrid};
    use crate::schemes::{BoundaryData, Forcing};
    use crate::truth::{AnalyticSolution, MemoryReference, TimePolicy};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn space(n: usize) -> Arc<DofMap> {
        Arc::new(DofMap::new(Arc::new(unit_square_mesh(n))))
    }

    fn random_velocity(sp: &Arc<DofMap>, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u: Vec<f64> = (0..sp.num_velocity_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for &n in sp.boundary_nodes() {
            u[n] = 0.0;
            u[n + sp.num_nodes()] = 0.0;
        }
        u
    }

    fn proj_stepper(sp: &Arc<DofMap>, backend: SolverBackend) -> Stepper {
        let mut cfg = SchemeConfig::new(SchemeKind::ProjBE, 1.0, 0.1, 1.0);
        cfg.solver.backend = backend;
        Stepper::new(cfg, Problem::new(sp.clone(), BoundaryData::Zero, Forcing::Zero), None).unwrap()
    }

    #[test]
    fn zero_state_stays_zero() {
        let sp = space(4);
        for kind in SchemeKind::ALL {
            let cfg = SchemeConfig::new(kind, 0.1, 0.1, 0.3);
            let mut st = Stepper::new(cfg, Problem::new(sp.clone(), BoundaryData::Zero, Forcing::Zero), None).unwrap();
            let mut s = State::zero(sp.clone());
            for _ in 0..3 {
                s = st.step(&s).unwrap();
            }
            assert_eq!(s.step, 3);
            assert!(s.u.coeffs().iter().chain(s.p.coeffs()).all(|v| *v == 0.0), "{kind}");
        }
    }

    #[test]
    fn projection_properties() {
        let sp = space(4);
        let m = block_diag2(&scalar_p2_mass(&sp));
        let b = assemble_divergence(&sp);
        let norm = |v: &[f64]| crate::linalg::dot(v, &m.spmv(v).unwrap()).sqrt();
        for backend in [SolverBackend::Direct, SolverBackend::Iterative] {
            let mut st = proj_stepper(&sp, backend);
            for seed in 0..20 {
                let u = random_velocity(&sp, seed);
                let (ut, _) = st.proj_step2(&u, 1).unwrap();
                assert!(norm(&ut) <= norm(&u) + 1e-9);
                let div = b.spmv(&ut).unwrap();
                assert!(norm2(&div) <= 1e-9 * norm2(&b.spmv(&u).unwrap()).max(1.0), "{backend:?}");
                let (ut2, q2) = st.proj_step2(&ut, 1).unwrap();
                let d: Vec<f64> = ut.iter().zip(&ut2).map(|(a, b)| a - b).collect();
                assert!(norm2(&d) < 1e-9 && norm2(&q2) < 1e-9);
            }
        }
    }

    #[test]
    fn backends_agree_on_projection() {
        let sp = space(4);
        let u = random_velocity(&sp, 7);
        let (a, qa) = proj_stepper(&sp, SolverBackend::Direct).proj_step2(&u, 1).unwrap();
        let (b, qb) = proj_stepper(&sp, SolverBackend::Iterative).proj_step2(&u, 1).unwrap();
        let du: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let dq: f64 = qa.iter().zip(&qb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(du < 1e-7 && dq < 1e-7, "{du} {dq}");
    }

    #[test]
    fn nudging_toward_own_state_is_inert() {
        let sp = space(4);
        let ana = AnalyticSolution::new(1.0);
        let u0 = Field::interpolate_velocity(sp.clone(), |p| ana.velocity(p, 0.0));
        let problem = Problem::new(sp.clone(), BoundaryData::Analytic(ana), Forcing::Analytic(ana));
        for kind in SchemeKind::ALL {
            let cfg = SchemeConfig::new(kind.first_order(), 1.0, 0.05, 0.05);
            let s0 = State::initial(u0.clone()).unwrap();
            let plain = Stepper::new(cfg, problem.clone(), None).unwrap().step(&s0).unwrap();
            let mem = MemoryReference { interval: 0.05, snapshots: vec![u0.coeffs().to_vec(), plain.u.coeffs().to_vec()], policy: TimePolicy::Strict };
            let coarse = CoarseGrid::covering(sp.mesh(), 2).unwrap();
            let itp = build_interpolant(&sp, coarse, InterpolantMode::default()).unwrap();
            let nudge = Nudging::new(1e3, itp, Arc::new(MeasurementSource::Memory(mem))).unwrap();
            let nudged = Stepper::new(cfg, problem.clone(), Some(&nudge)).unwrap().step(&s0).unwrap();
            let d: Vec<f64> = plain.u.coeffs().iter().zip(nudged.u.coeffs()).map(|(a, b)| a - b).collect();
            assert!(norm2(&d) <= 1e-9 * norm2(plain.u.coeffs()), "{kind}: {}", norm2(&d));
        }
    }

    #[test]
    fn iterative_backend_matches_direct() {
        let sp = space(4);
        let ana = AnalyticSolution::new(1.0);
        let u0 = Field::interpolate_velocity(sp.clone(), |p| ana.velocity(p, 0.0));
        let problem = Problem::new(sp.clone(), BoundaryData::Analytic(ana), Forcing::Analytic(ana));
        for kind in SchemeKind::ALL {
            let mut out = Vec::new();
            for backend in [SolverBackend::Direct, SolverBackend::Iterative] {
                let mut cfg = SchemeConfig::new(kind, 1.0, 0.05, 0.1);
                cfg.solver.backend = backend;
                let mut st = Stepper::new(cfg, problem.clone(), None).unwrap();
                let s = st.step(&State::initial(u0.clone()).unwrap()).unwrap();
                out.push(st.step(&s).unwrap().u.into_coeffs());
            }
            let d: Vec<f64> = out[0].iter().zip(&out[1]).map(|(a, b)| a - b).collect();
            assert!(norm2(&d) < 1e-7 * norm2(&out[0]), "{kind}");
        }
    }
}
