//! Dense reference assembly, written without the library's basis or quadrature.
//!
//! Basis functions are monomials in physical coordinates fitted to the nodal
//! values; integrals use a collapsed 6 × 6 Gauss-Legendre product rule.

#![allow(dead_code)]

use nudge_ns::fem::DofMap;
use nudge_ns::mesh::{BoundaryTag, Mesh, Point};

const GL_X: [f64; 6] = [-0.932_469_514_203_152_1, -0.661_209_386_466_264_5, -0.238_619_186_083_196_9, 0.238_619_186_083_196_9, 0.661_209_386_466_264_5, 0.932_469_514_203_152_1];
const GL_W: [f64; 6] = [0.171_324_492_379_170_4, 0.360_761_573_048_138_6, 0.467_913_934_572_691_0, 0.467_913_934_572_691_0, 0.360_761_573_048_138_6, 0.171_324_492_379_170_4];

/// Quadrature points and weights on the triangle `t`.
pub fn triangle_rule(t: [Point; 3]) -> Vec<(Point, f64)> {
    let det = ((t[1].x - t[0].x) * (t[2].y - t[0].y) - (t[2].x - t[0].x) * (t[1].y - t[0].y)).abs();
    let mut out = Vec::with_capacity(36);
    for (xs, ws) in GL_X.iter().zip(GL_W) {
        let s = 0.5 * (xs + 1.0);
        for (xt, wt) in GL_X.iter().zip(GL_W) {
            let t01 = 0.5 * (xt + 1.0);
            let (u, v) = (s, t01 * (1.0 - s));
            let p = Point::new(t[0].x + u * (t[1].x - t[0].x) + v * (t[2].x - t[0].x), t[0].y + u * (t[1].y - t[0].y) + v * (t[2].y - t[0].y));
            out.push((p, 0.25 * ws * wt * (1.0 - s) * det));
        }
    }
    out
}

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

/// A polynomial basis function: value and gradient from monomial coefficients.
#[derive(Clone)]
pub struct Poly {
    c: Vec<f64>,
}

impl Poly {
    fn monomials(p: Point, n: usize) -> Vec<f64> {
        let all = [1.0, p.x, p.y, p.x * p.x, p.x * p.y, p.y * p.y];
        all[..n].to_vec()
    }

    /// Lagrange basis on `nodes` (3 nodes: linear, 6 nodes: quadratic).
    pub fn lagrange(nodes: &[Point]) -> Vec<Poly> {
        let n = nodes.len();
        let v: Vec<Vec<f64>> = nodes.iter().map(|p| Self::monomials(*p, n)).collect();
        (0..n)
            .map(|i| {
                let e: Vec<f64> = (0..n).map(|j| f64::from(u8::from(i == j))).collect();
                Poly { c: solve_dense(v.clone(), e) }
            })
            .collect()
    }

    pub fn value(&self, p: Point) -> f64 {
        Self::monomials(p, self.c.len()).iter().zip(&self.c).map(|(m, c)| m * c).sum()
    }

    pub fn grad(&self, p: Point) -> [f64; 2] {
        let c = |k: usize| self.c.get(k).copied().unwrap_or(0.0);
        [c(1) + 2.0 * c(3) * p.x + c(4) * p.y, c(2) + c(4) * p.x + 2.0 * c(5) * p.y]
    }
}

/// Per-cell P2 and P1 bases with their global indices.
pub struct Oracle {
    pub nn: usize,
    pub np: usize,
    cells: Vec<([Point; 3], [usize; 6], Vec<Poly>, [usize; 3], Vec<Poly>)>,
}

impl Oracle {
    pub fn new(space: &DofMap) -> Self {
        let mesh = space.mesh();
        let pts = space.node_points();
        let cells = (0..mesh.num_cells())
            .map(|c| {
                let nodes = space.cell_nodes()[c];
                let p2 = Poly::lagrange(&nodes.map(|k| pts[k]));
                let verts = mesh.cells()[c];
                let p1 = Poly::lagrange(&verts.map(|v| mesh.vertices()[v]));
                (mesh.cell_points(c), nodes, p2, verts, p1)
            })
            .collect();
        Self { nn: space.num_nodes(), np: space.num_pressure_dofs(), cells }
    }

    fn scalar_p2(&self, f: impl Fn(Point, &Poly, &Poly) -> f64) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.nn]; self.nn];
        for (tri, nodes, p2, _, _) in &self.cells {
            for (q, w) in triangle_rule(*tri) {
                for i in 0..6 {
                    for j in 0..6 {
                        a[nodes[i]][nodes[j]] += w * f(q, &p2[i], &p2[j]);
                    }
                }
            }
        }
        a
    }

    pub fn p2_mass(&self) -> Vec<Vec<f64>> {
        self.scalar_p2(|q, i, j| i.value(q) * j.value(q))
    }

    pub fn p2_stiffness(&self) -> Vec<Vec<f64>> {
        self.scalar_p2(|q, i, j| {
            let (a, b) = (i.grad(q), j.grad(q));
            a[0] * b[0] + a[1] * b[1]
        })
    }

    /// `∫ ∂_a φ_i ∂_b φ_j` on the scalar space, row i, column j.
    pub fn p2_derivative_pair(&self, a: usize, b: usize) -> Vec<Vec<f64>> {
        self.scalar_p2(|q, i, j| i.grad(q)[a] * j.grad(q)[b])
    }

    /// `∫ (w·∇φ_j) φ_i` with `w` given by velocity coefficients.
    pub fn p2_convection(&self, w: &[f64]) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.nn]; self.nn];
        for (tri, nodes, p2, _, _) in &self.cells {
            for (q, wq) in triangle_rule(*tri) {
                let (mut wx, mut wy) = (0.0, 0.0);
                for k in 0..6 {
                    let v = p2[k].value(q);
                    wx += v * w[nodes[k]];
                    wy += v * w[self.nn + nodes[k]];
                }
                for i in 0..6 {
                    for j in 0..6 {
                        let g = p2[j].grad(q);
                        a[nodes[i]][nodes[j]] += wq * (wx * g[0] + wy * g[1]) * p2[i].value(q);
                    }
                }
            }
        }
        a
    }

    pub fn p1_mass(&self) -> Vec<Vec<f64>> {
        self.scalar_p1(|q, i, j| i.value(q) * j.value(q))
    }

    pub fn p1_stiffness(&self) -> Vec<Vec<f64>> {
        self.scalar_p1(|q, i, j| {
            let (a, b) = (i.grad(q), j.grad(q));
            a[0] * b[0] + a[1] * b[1]
        })
    }

    fn scalar_p1(&self, f: impl Fn(Point, &Poly, &Poly) -> f64) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.np]; self.np];
        for (tri, _, _, verts, p1) in &self.cells {
            for (q, w) in triangle_rule(*tri) {
                for i in 0..3 {
                    for j in 0..3 {
                        a[verts[i]][verts[j]] += w * f(q, &p1[i], &p1[j]);
                    }
                }
            }
        }
        a
    }

    /// `B[q, v] = ∫ ψ_q ∇·φ_v` over the full velocity space.
    pub fn divergence(&self) -> Vec<Vec<f64>> {
        let mut b = vec![vec![0.0; 2 * self.nn]; self.np];
        for (tri, nodes, p2, verts, p1) in &self.cells {
            for (q, w) in triangle_rule(*tri) {
                for i in 0..3 {
                    let psi = p1[i].value(q);
                    for j in 0..6 {
                        let g = p2[j].grad(q);
                        b[verts[i]][nodes[j]] += w * psi * g[0];
                        b[verts[i]][self.nn + nodes[j]] += w * psi * g[1];
                    }
                }
            }
        }
        b
    }

    /// `(f, φ)` for every velocity dof.
    pub fn load(&self, f: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
        let mut b = vec![0.0; 2 * self.nn];
        for (tri, nodes, p2, _, _) in &self.cells {
            for (q, w) in triangle_rule(*tri) {
                let v = f(q);
                for i in 0..6 {
                    b[nodes[i]] += w * v[0] * p2[i].value(q);
                    b[self.nn + nodes[i]] += w * v[1] * p2[i].value(q);
                }
            }
        }
        b
    }

    /// `∫ φ_i` for every scalar P2 node.
    pub fn p2_integrals(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.nn];
        for (tri, nodes, p2, _, _) in &self.cells {
            for (q, w) in triangle_rule(*tri) {
                for i in 0..6 {
                    out[nodes[i]] += w * p2[i].value(q);
                }
            }
        }
        out
    }
}

/// `[[a, 0], [0, a]]`.
pub fn block_diag(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut out = vec![vec![0.0; 2 * n]; 2 * n];
    for i in 0..n {
        for j in 0..n {
            out[i][j] = a[i][j];
            out[n + i][n + j] = a[i][j];
        }
    }
    out
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    assert_eq!((a.len(), a[0].len()), (b.len(), b[0].len()), "shape");
    a.iter().zip(b).flat_map(|(r, s)| r.iter().zip(s).map(|(x, y)| (x - y).abs())).fold(0.0, f64::max)
}

/// Two cells of an irregular quadrilateral, so no entry is special by symmetry.
pub fn skewed_two_cell_mesh() -> Mesh {
    let v = vec![Point::new(0.0, 0.0), Point::new(1.3, 0.2), Point::new(1.1, 1.0), Point::new(-0.2, 0.9)];
    Mesh::with_boundary_tags(v, vec![[0, 1, 2], [0, 2, 3]], |_, _| BoundaryTag::Wall).unwrap()
}
