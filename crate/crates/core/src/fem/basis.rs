//! Lagrange P1/P2 shape functions on a triangle in barycentric form.
//!
//! Local P2 order: the three vertices, then the three edge midpoints, where
//! edge `k` joins vertices `k+1` and `k+2` (it lies opposite vertex `k`).

use crate::mesh::{signed_area, Point};

pub const EDGE_VERTS: [[usize; 2]; 3] = [[1, 2], [2, 0], [0, 1]];

/// Affine data of one cell.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    pub points: [Point; 3],
    pub area: f64,
    /// `∇λ_k`, constant on the cell.
    pub grad_lambda: [[f64; 2]; 3],
}

impl CellGeometry {
    pub fn new(points: [Point; 3]) -> Self {
        let [p0, p1, p2] = points;
        let area = signed_area(p0, p1, p2);
        let s = 0.5 / area;
        let grad_lambda = [
            [(p1.y - p2.y) * s, (p2.x - p1.x) * s],
            [(p2.y - p0.y) * s, (p0.x - p2.x) * s],
            [(p0.y - p1.y) * s, (p1.x - p0.x) * s],
        ];
        Self { points, area, grad_lambda }
    }

    pub fn point(&self, l: &[f64; 3]) -> Point {
        let [p0, p1, p2] = self.points;
        Point::new(l[0] * p0.x + l[1] * p1.x + l[2] * p2.x, l[0] * p0.y + l[1] * p1.y + l[2] * p2.y)
    }
}

pub fn p1_values(l: &[f64; 3]) -> [f64; 3] {
    *l
}

pub fn p2_values(l: &[f64; 3]) -> [f64; 6] {
    let mut v = [0.0; 6];
    for k in 0..3 {
        v[k] = l[k] * (2.0 * l[k] - 1.0);
        let [a, b] = EDGE_VERTS[k];
        v[3 + k] = 4.0 * l[a] * l[b];
    }
    v
}

pub fn p2_gradients(g: &CellGeometry, l: &[f64; 3]) -> [[f64; 2]; 6] {
    let gl = &g.grad_lambda;
    let mut out = [[0.0; 2]; 6];
    for k in 0..3 {
        let s = 4.0 * l[k] - 1.0;
        out[k] = [s * gl[k][0], s * gl[k][1]];
        let [a, b] = EDGE_VERTS[k];
        out[3 + k] = [
            4.0 * (l[a] * gl[b][0] + l[b] * gl[a][0]),
            4.0 * (l[a] * gl[b][1] + l[b] * gl[a][1]),
        ];
    }
    out
}

/// Barycentric coordinates of the six P2 nodes.
pub const P2_NODES: [[f64; 3]; 6] = [
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
    [0.5, 0.5, 0.0],
];
