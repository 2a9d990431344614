use super::clip::clip_triangle;
use super::CdaError;
use crate::fem::assembly::{block_diag2, scalar_p2_mass};
use crate::fem::basis::{p2_gradients, p2_values, CellGeometry};
use crate::fem::quadrature::QuadratureRule;
use crate::fem::DofMap;
use crate::linalg::{SparseMatrix, TripletBuilder};
use crate::mesh::{barycentric_in, CoarseGrid, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InterpolantMode {
    /// L2 average over each coarse rectangle (intersected with the domain).
    #[default]
    PiecewiseConstantAverage,
    /// Coarse P1 interpolation from the coarse vertices, prolonged to P2.
    CoarseNodalP1,
}

impl InterpolantMode {
    pub fn as_str(self) -> &'static str {
        match self {
            InterpolantMode::PiecewiseConstantAverage => "average",
            InterpolantMode::CoarseNodalP1 => "nodal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "average" => Some(InterpolantMode::PiecewiseConstantAverage),
            "nodal" => Some(InterpolantMode::CoarseNodalP1),
            _ => None,
        }
    }
}

/// Piece of a fine cell lying in one coarse cell.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Piece {
    pub fine: usize,
    /// Index into the kept coarse cells.
    pub coarse: usize,
    pub tri: [Point; 3],
}

/// Coarse interpolation operator `I_H`, acting on each velocity component
/// separately. Scalar matrices live on the P2 nodes of the fine space.
#[derive(Debug, Clone)]
pub struct Interpolant {
    pub coarse: CoarseGrid,
    pub mode: InterpolantMode,
    num_nodes: usize,
    /// Fine nodal values → coarse representation.
    r: SparseMatrix,
    /// Coarse representation → fine P2 nodal values (nodal mode).
    e: Option<SparseMatrix>,
    /// `w[K, j] = ∫_K φ_j` (average mode).
    w: Option<SparseMatrix>,
    /// Coarse cells kept (average mode); all coarse vertices in nodal mode.
    kept: Vec<usize>,
    pieces: Vec<Piece>,
    measure: Vec<f64>,
}

fn rel_tol_area(g: &CoarseGrid) -> f64 {
    1e-12 * g.dx * g.dy
}

impl Interpolant {
    pub fn new(space: &DofMap, coarse: CoarseGrid, mode: InterpolantMode) -> Result<Self, CdaError> {
        match mode {
            InterpolantMode::PiecewiseConstantAverage => Self::average(space, coarse),
            InterpolantMode::CoarseNodalP1 => Self::nodal(space, coarse),
        }
    }

    fn average(space: &DofMap, coarse: CoarseGrid) -> Result<Self, CdaError> {
        let mesh = space.mesh();
        let n = coarse.n;
        let (ox, oy) = (coarse.origin.x, coarse.origin.y);
        let mut raw: Vec<(usize, usize, [Point; 3])> = Vec::new();
        let mut covered = 0.0;
        for c in 0..mesh.num_cells() {
            let pts = mesh.cell_points(c);
            let (mut lx, mut ly, mut hx, mut hy) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
            for p in pts {
                lx = lx.min(p.x);
                ly = ly.min(p.y);
                hx = hx.max(p.x);
                hy = hy.max(p.y);
            }
            let idx = |v: f64, o: f64, d: f64| ((v - o) / d).floor();
            let clamp = |v: f64| (v.max(0.0) as usize).min(n - 1);
            let (i0, i1) = (clamp(idx(lx, ox, coarse.dx)), clamp(idx(hx, ox, coarse.dx)));
            let (j0, j1) = (clamp(idx(ly, oy, coarse.dy)), clamp(idx(hy, oy, coarse.dy)));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let k = j * n + i;
                    let (x0, y0, x1, y1) = coarse.rect(k);
                    for t in clip_triangle(pts, x0, y0, x1, y1) {
                        covered += crate::mesh::signed_area(t[0], t[1], t[2]);
                        raw.push((c, k, t));
                    }
                }
            }
        }
        let total = mesh.total_area();
        if (covered - total).abs() > 1e-9 * total {
            return Err(CdaError::NotCovered { covered, total });
        }
        // per coarse cell measure, then drop cells with negligible overlap
        let mut measure_all = vec![0.0; coarse.num_cells()];
        for (_, k, t) in &raw {
            measure_all[*k] += crate::mesh::signed_area(t[0], t[1], t[2]);
        }
        let tol = rel_tol_area(&coarse);
        let mut new_index = vec![usize::MAX; coarse.num_cells()];
        let mut kept = Vec::new();
        for (k, m) in measure_all.iter().enumerate() {
            if *m > tol {
                new_index[k] = kept.len();
                kept.push(k);
            }
        }
        let measure: Vec<f64> = kept.iter().map(|k| measure_all[*k]).collect();
        let pieces: Vec<Piece> = raw
            .into_iter()
            .filter(|(_, k, _)| new_index[*k] != usize::MAX)
            .map(|(fine, k, tri)| Piece { fine, coarse: new_index[k], tri })
            .collect();

        let q = QuadratureRule::radon7();
        let nn = space.num_nodes();
        let mut wt = TripletBuilder::with_capacity(kept.len(), nn, pieces.len() * 6);
        for piece in &pieces {
            let fine = mesh.cell_points(piece.fine);
            let sub = CellGeometry::new(piece.tri);
            let nodes = &space.cell_nodes()[piece.fine];
            let mut local = [0.0; 6];
            for (l, w) in q.points.iter().zip(&q.weights) {
                let lf = barycentric_in(&fine, sub.point(l));
                let phi = p2_values(&lf);
                for m in 0..6 {
                    local[m] += w * sub.area * phi[m];
                }
            }
            for m in 0..6 {
                wt.push(piece.coarse, nodes[m], local[m]);
            }
        }
        let w = wt.build();
        let mut r = w.clone();
        {
            let indptr = r.indptr().to_vec();
            let vals = r.values_mut();
            for k in 0..measure.len() {
                for v in &mut vals[indptr[k]..indptr[k + 1]] {
                    *v /= measure[k];
                }
            }
        }
        Ok(Self { coarse, mode: InterpolantMode::PiecewiseConstantAverage, num_nodes: nn, r, e: None, w: Some(w), kept, pieces, measure })
    }

    fn nodal(space: &DofMap, coarse: CoarseGrid) -> Result<Self, CdaError> {
        let mesh = space.mesh();
        let nn = space.num_nodes();
        let cverts = coarse.mesh.vertices().to_vec();
        let mut rt = TripletBuilder::with_capacity(cverts.len(), nn, 6 * cverts.len());
        for (k, p) in cverts.iter().enumerate() {
            let (cell, l) = space.locator().locate(mesh, *p).ok_or(CdaError::OutsideDomain { x: p.x, y: p.y })?;
            let phi = p2_values(&l);
            for (m, node) in space.cell_nodes()[cell].iter().enumerate() {
                if phi[m] != 0.0 {
                    rt.push(k, *node, phi[m]);
                }
            }
        }
        let r = rt.build();
        let cloc = crate::mesh::PointLocator::new(&coarse.mesh);
        let mut et = TripletBuilder::with_capacity(nn, cverts.len(), 3 * nn);
        for (i, p) in space.node_points().iter().enumerate() {
            let (cell, l) = cloc.locate(&coarse.mesh, *p).ok_or(CdaError::OutsideDomain { x: p.x, y: p.y })?;
            for (m, v) in coarse.mesh.cells()[cell].iter().enumerate() {
                if l[m] != 0.0 {
                    et.push(i, *v, l[m]);
                }
            }
        }
        let e = et.build();
        let kept = (0..cverts.len()).collect();
        Ok(Self { coarse, mode: InterpolantMode::CoarseNodalP1, num_nodes: nn, r, e: Some(e), w: None, kept, pieces: Vec::new(), measure: Vec::new() })
    }

    /// Size of the coarse representation (kept cells or coarse vertices).
    pub fn coarse_len(&self) -> usize {
        self.r.nrows()
    }

    /// Coarse cells with nonzero overlap (average mode) or coarse vertices (nodal).
    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    pub fn r(&self) -> &SparseMatrix {
        &self.r
    }

    pub fn e(&self) -> Option<&SparseMatrix> {
        self.e.as_ref()
    }

    /// Coarse representation of a scalar fine field.
    pub fn restrict(&self, phi: &[f64]) -> Vec<f64> {
        self.r.spmv(phi).expect("fine field length")
    }

    /// Scalar `J` with `vᵀ J u = (I_H u, v)`.
    pub fn scalar_nudging_matrix(&self, space: &DofMap) -> SparseMatrix {
        match self.mode {
            InterpolantMode::PiecewiseConstantAverage => {
                let w = self.w.as_ref().expect("average mode has W");
                w.transpose().matmul(&self.r).expect("shapes agree")
            }
            InterpolantMode::CoarseNodalP1 => {
                let e = self.e.as_ref().expect("nodal mode has E");
                let m = scalar_p2_mass(space);
                m.matmul(&e.matmul(&self.r).expect("shapes agree")).expect("shapes agree")
            }
        }
    }

    /// `I_H` applied to a coarse representation of a function already in its
    /// range; returns the coarse representation again.
    pub fn reapply(&self, coarse: &[f64]) -> Vec<f64> {
        match self.mode {
            InterpolantMode::PiecewiseConstantAverage => {
                // integrate the piecewise constant over the pieces and average
                let mut acc = vec![0.0; self.measure.len()];
                for p in &self.pieces {
                    acc[p.coarse] += crate::mesh::signed_area(p.tri[0], p.tri[1], p.tri[2]) * coarse[p.coarse];
                }
                acc.iter().zip(&self.measure).map(|(a, m)| a / m).collect()
            }
            InterpolantMode::CoarseNodalP1 => {
                let e = self.e.as_ref().expect("nodal mode has E");
                self.r.spmv(&e.spmv(coarse).expect("coarse length")).expect("fine length")
            }
        }
    }

    /// `(‖I_H φ‖, ‖I_H φ − φ‖)` in L2 for a scalar fine field.
    pub fn norms(&self, space: &DofMap, phi: &[f64]) -> (f64, f64) {
        assert_eq!(phi.len(), self.num_nodes);
        let c = self.restrict(phi);
        let q = QuadratureRule::collapsed_gauss(4);
        let mesh = space.mesh();
        let (mut n2, mut e2) = (0.0, 0.0);
        match self.mode {
            InterpolantMode::PiecewiseConstantAverage => {
                for p in &self.pieces {
                    let fine = mesh.cell_points(p.fine);
                    let sub = CellGeometry::new(p.tri);
                    let nodes = &space.cell_nodes()[p.fine];
                    for (l, w) in q.points.iter().zip(&q.weights) {
                        let lf = barycentric_in(&fine, sub.point(l));
                        let v = p2_values(&lf).iter().zip(nodes).map(|(b, n)| b * phi[*n]).sum::<f64>();
                        let ih = c[p.coarse];
                        n2 += w * sub.area * ih * ih;
                        e2 += w * sub.area * (ih - v) * (ih - v);
                    }
                }
            }
            InterpolantMode::CoarseNodalP1 => {
                let e = self.e.as_ref().expect("nodal mode has E");
                let ih = e.spmv(&c).expect("coarse length");
                for (cell, nodes) in space.cell_nodes().iter().enumerate() {
                    let g = CellGeometry::new(mesh.cell_points(cell));
                    for (l, w) in q.points.iter().zip(&q.weights) {
                        let b = p2_values(l);
                        let (mut a, mut v) = (0.0, 0.0);
                        for m in 0..6 {
                            a += b[m] * ih[nodes[m]];
                            v += b[m] * phi[nodes[m]];
                        }
                        n2 += w * g.area * a * a;
                        e2 += w * g.area * (a - v) * (a - v);
                    }
                }
            }
        }
        (n2.sqrt(), e2.sqrt())
    }

    /// Velocity version of [`Interpolant::scalar_nudging_matrix`].
    pub fn nudging_matrix(&self, space: &DofMap) -> SparseMatrix {
        block_diag2(&self.scalar_nudging_matrix(space))
    }
}

/// L2 norm of the gradient of a scalar P2 field.
pub(crate) fn scalar_h1_seminorm(space: &DofMap, phi: &[f64]) -> f64 {
    let q = QuadratureRule::radon7();
    let mesh = space.mesh();
    let mut s = 0.0;
    for (cell, nodes) in space.cell_nodes().iter().enumerate() {
        let g = CellGeometry::new(mesh.cell_points(cell));
        for (l, w) in q.points.iter().zip(&q.weights) {
            let d = p2_gradients(&g, l);
            let (mut gx, mut gy) = (0.0, 0.0);
            for m in 0..6 {
                gx += d[m][0] * phi[nodes[m]];
                gy += d[m][1] * phi[nodes[m]];
            }
            s += w * g.area * (gx * gx + gy * gy);
        }
    }
    s.sqrt()
}
