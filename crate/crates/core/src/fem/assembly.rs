//! Assembly of the bilinear and trilinear forms on P2/P1.
//!
//! Scalar P2 matrices share one sparsity pattern per [`DofMap`], so sums of
//! them are cheap and factorizations can reuse their symbolic analysis.
//! Velocity matrices are `2 × 2` blocks of scalar ones.

use super::basis::{p2_gradients, p2_values, CellGeometry};
use super::dofmap::DofMap;
use super::field::{Field, FieldKind};
use super::quadrature::QuadratureRule;
use super::FemError;
use crate::linalg::{SparseMatrix, TripletBuilder};
use crate::mesh::Point;

/// Which convection form to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvectionForm {
    /// `(a·∇u, v)`.
    Plain,
    /// `½((a·∇u, v) − (a·∇v, u))`.
    Skew,
}

fn assemble_p2(space: &DofMap, mut local: impl FnMut(usize, &CellGeometry, &mut [f64; 36])) -> SparseMatrix {
    let pat = space.p2_pattern();
    let mesh = space.mesh();
    let mut data = vec![0.0; pat.nnz()];
    let mut k = [0.0; 36];
    for c in 0..mesh.num_cells() {
        let g = CellGeometry::new(mesh.cell_points(c));
        k.fill(0.0);
        local(c, &g, &mut k);
        for (p, v) in pat.pos[c].iter().zip(&k) {
            data[*p] += v;
        }
    }
    pat.matrix(space.num_nodes(), data)
}

fn assemble_p1(space: &DofMap, mut local: impl FnMut(&CellGeometry, &mut [f64; 9])) -> SparseMatrix {
    let pat = space.p1_pattern();
    let mesh = space.mesh();
    let mut data = vec![0.0; pat.nnz()];
    let mut k = [0.0; 9];
    for c in 0..mesh.num_cells() {
        let g = CellGeometry::new(mesh.cell_points(c));
        k.fill(0.0);
        local(&g, &mut k);
        for (p, v) in pat.pos[c].iter().zip(&k) {
            data[*p] += v;
        }
    }
    pat.matrix(space.num_pressure_dofs(), data)
}

pub fn scalar_p2_mass(space: &DofMap) -> SparseMatrix {
    let q = QuadratureRule::radon7();
    let phis: Vec<[f64; 6]> = q.points.iter().map(p2_values).collect();
    assemble_p2(space, |_, g, k| {
        for (phi, w) in phis.iter().zip(&q.weights) {
            let s = w * g.area;
            for i in 0..6 {
                for j in 0..6 {
                    k[6 * i + j] += s * phi[i] * phi[j];
                }
            }
        }
    })
}

pub fn scalar_p2_stiffness(space: &DofMap) -> SparseMatrix {
    let q = QuadratureRule::radon7();
    assemble_p2(space, |_, g, k| {
        for (l, w) in q.points.iter().zip(&q.weights) {
            let d = p2_gradients(g, l);
            let s = w * g.area;
            for i in 0..6 {
                for j in 0..6 {
                    k[6 * i + j] += s * (d[i][0] * d[j][0] + d[i][1] * d[j][1]);
                }
            }
        }
    })
}

pub fn scalar_p1_mass(space: &DofMap) -> SparseMatrix {
    assemble_p1(space, |g, k| {
        for i in 0..3 {
            for j in 0..3 {
                k[3 * i + j] = g.area / 12.0 * if i == j { 2.0 } else { 1.0 };
            }
        }
    })
}

pub fn scalar_p1_stiffness(space: &DofMap) -> SparseMatrix {
    assemble_p1(space, |g, k| {
        let d = &g.grad_lambda;
        for i in 0..3 {
            for j in 0..3 {
                k[3 * i + j] = g.area * (d[i][0] * d[j][0] + d[i][1] * d[j][1]);
            }
        }
    })
}

/// `diag(s, s)` for the two velocity components.
pub fn block_diag2(s: &SparseMatrix) -> SparseMatrix {
    SparseMatrix::block(&[vec![Some(s), None], vec![None, Some(s)]]).expect("square blocks")
}

pub fn assemble_mass(space: &DofMap, kind: FieldKind) -> SparseMatrix {
    match kind {
        FieldKind::Velocity => block_diag2(&scalar_p2_mass(space)),
        FieldKind::Pressure => scalar_p1_mass(space),
    }
}

pub fn assemble_stiffness(space: &DofMap, kind: FieldKind) -> SparseMatrix {
    match kind {
        FieldKind::Velocity => block_diag2(&scalar_p2_stiffness(space)),
        FieldKind::Pressure => scalar_p1_stiffness(space),
    }
}

/// `B[q, v] = ∫ ψ_q ∇·φ_v`, shape (pressure dofs × velocity dofs).
pub fn assemble_divergence(space: &DofMap) -> SparseMatrix {
    let q = QuadratureRule::radon7();
    let mesh = space.mesh();
    let nn = space.num_nodes();
    let mut t = TripletBuilder::with_capacity(space.num_pressure_dofs(), 2 * nn, 36 * mesh.num_cells());
    for (c, nodes) in space.cell_nodes().iter().enumerate() {
        let g = CellGeometry::new(mesh.cell_points(c));
        let verts = mesh.cells()[c];
        let mut k = [[[0.0; 6]; 2]; 3];
        for (l, w) in q.points.iter().zip(&q.weights) {
            let d = p2_gradients(&g, l);
            let s = w * g.area;
            for i in 0..3 {
                for j in 0..6 {
                    k[i][0][j] += s * l[i] * d[j][0];
                    k[i][1][j] += s * l[i] * d[j][1];
                }
            }
        }
        for i in 0..3 {
            for comp in 0..2 {
                for j in 0..6 {
                    t.push(verts[i], comp * nn + nodes[j], k[i][comp][j]);
                }
            }
        }
    }
    t.build()
}

/// `G[u, v] = ∫ (∇·φ_u)(∇·φ_v)` on the velocity space.
pub fn assemble_graddiv(space: &DofMap) -> SparseMatrix {
    let q = QuadratureRule::radon7();
    let block = |a: usize, b: usize| {
        assemble_p2(space, |_, g, k| {
            for (l, w) in q.points.iter().zip(&q.weights) {
                let d = p2_gradients(g, l);
                let s = w * g.area;
                for i in 0..6 {
                    for j in 0..6 {
                        k[6 * i + j] += s * d[i][a] * d[j][b];
                    }
                }
            }
        })
    };
    let (g00, g01, g11) = (block(0, 0), block(0, 1), block(1, 1));
    let g10 = g01.transpose();
    SparseMatrix::block(&[vec![Some(&g00), Some(&g01)], vec![Some(&g10), Some(&g11)]]).expect("square blocks")
}

/// Scalar convection matrix `C[i, j] = ∫ (a·∇φ_j) φ_i`, or its skew part.
/// The same matrix acts on each velocity component.
pub fn scalar_convection(space: &DofMap, advector: &[f64], form: ConvectionForm) -> Result<SparseMatrix, FemError> {
    let nn = space.num_nodes();
    if advector.len() != 2 * nn {
        return Err(FemError::LengthMismatch { expected: 2 * nn, found: advector.len() });
    }
    let q = QuadratureRule::radon7();
    let phis: Vec<[f64; 6]> = q.points.iter().map(p2_values).collect();
    let cell_nodes = space.cell_nodes();
    Ok(assemble_p2(space, |c, g, k| {
        let nodes = &cell_nodes[c];
        for ((l, phi), w) in q.points.iter().zip(&phis).zip(&q.weights) {
            let d = p2_gradients(g, l);
            let (mut ax, mut ay) = (0.0, 0.0);
            for m in 0..6 {
                ax += phi[m] * advector[nodes[m]];
                ay += phi[m] * advector[nn + nodes[m]];
            }
            let s = w * g.area;
            for j in 0..6 {
                let adv = s * (ax * d[j][0] + ay * d[j][1]);
                for i in 0..6 {
                    k[6 * i + j] += adv * phi[i];
                }
            }
        }
        if form == ConvectionForm::Skew {
            for i in 0..6 {
                for j in 0..i {
                    let s = 0.5 * (k[6 * i + j] - k[6 * j + i]);
                    k[6 * i + j] = s;
                    k[6 * j + i] = -s;
                }
                k[6 * i + i] = 0.0;
            }
        }
    }))
}

/// Velocity-space convection matrix `diag(C, C)`.
pub fn assemble_convection(space: &DofMap, advector: &Field, form: ConvectionForm) -> Result<SparseMatrix, FemError> {
    if advector.kind() != FieldKind::Velocity {
        return Err(FemError::WrongKind);
    }
    Ok(block_diag2(&scalar_convection(space, advector.coeffs(), form)?))
}

/// `(f, φ_v)` for every velocity dof, with a rule exact to degree `degree`.
pub fn load_vector(space: &DofMap, degree: usize, f: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
    let q = QuadratureRule::of_degree(degree);
    let phis: Vec<[f64; 6]> = q.points.iter().map(p2_values).collect();
    let mesh = space.mesh();
    let nn = space.num_nodes();
    let mut b = vec![0.0; 2 * nn];
    for (c, nodes) in space.cell_nodes().iter().enumerate() {
        let g = CellGeometry::new(mesh.cell_points(c));
        for ((l, phi), w) in q.points.iter().zip(&phis).zip(&q.weights) {
            let v = f(g.point(l));
            let s = w * g.area;
            for i in 0..6 {
                b[nodes[i]] += s * v[0] * phi[i];
                b[nn + nodes[i]] += s * v[1] * phi[i];
            }
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{unit_square_mesh, Mesh, Point};
    use std::sync::Arc;

    fn reference_triangle() -> DofMap {
        let v = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        let m = Mesh::with_boundary_tags(v, vec![[0, 1, 2]], |_, _| crate::mesh::BoundaryTag::Wall).unwrap();
        DofMap::new(Arc::new(m))
    }

    #[test]
    fn p1_reference_matrices() {
        let d = reference_triangle();
        let m = scalar_p1_mass(&d).to_dense();
        let k = scalar_p1_stiffness(&d).to_dense();
        let m_exact = [[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]];
        let k_exact = [[2.0, -1.0, -1.0], [-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((m[i][j] - m_exact[i][j] / 24.0).abs() < 1e-15);
                assert!((k[i][j] - k_exact[i][j] / 2.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mass_integrates_area() {
        let d = DofMap::new(Arc::new(unit_square_mesh(8)));
        for m in [scalar_p2_mass(&d), scalar_p1_mass(&d)] {
            let one = vec![1.0; m.nrows()];
            let total: f64 = m.spmv(&one).unwrap().iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
        let k = scalar_p2_stiffness(&d);
        assert!(k.spmv(&vec![1.0; k.nrows()]).unwrap().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn graddiv_kills_divergence_free_quadratic() {
        let d = Arc::new(DofMap::new(Arc::new(unit_square_mesh(4))));
        let u = Field::interpolate_velocity(d.clone(), |p| [p.x, -p.y]);
        let g = assemble_graddiv(&d);
        assert!(g.spmv(u.coeffs()).unwrap().iter().all(|v| v.abs() < 1e-12));
        let b = assemble_divergence(&d);
        assert!(b.spmv(u.coeffs()).unwrap().iter().all(|v| v.abs() < 1e-12));
    }
}
