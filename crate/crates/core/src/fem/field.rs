use std::sync::Arc;

use super::basis::{p2_gradients, p2_values, CellGeometry};
use super::dofmap::DofMap;
use super::quadrature::QuadratureRule;
use super::FemError;
use crate::mesh::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// Two-component P2.
    Velocity,
    /// Scalar P1.
    Pressure,
}

/// Coefficients of a finite-element function on a [`DofMap`].
#[derive(Debug, Clone)]
pub struct Field {
    space: Arc<DofMap>,
    kind: FieldKind,
    coeffs: Vec<f64>,
}

pub(crate) fn dof_count(space: &DofMap, kind: FieldKind) -> usize {
    match kind {
        FieldKind::Velocity => space.num_velocity_dofs(),
        FieldKind::Pressure => space.num_pressure_dofs(),
    }
}

impl Field {
    pub fn zeros(space: Arc<DofMap>, kind: FieldKind) -> Self {
        let n = dof_count(&space, kind);
        Self { space, kind, coeffs: vec![0.0; n] }
    }

    pub fn from_coeffs(space: Arc<DofMap>, kind: FieldKind, coeffs: Vec<f64>) -> Result<Self, FemError> {
        let n = dof_count(&space, kind);
        if coeffs.len() != n {
            return Err(FemError::LengthMismatch { expected: n, found: coeffs.len() });
        }
        Ok(Self { space, kind, coeffs })
    }

    /// Nodal interpolant of a vector function.
    pub fn interpolate_velocity(space: Arc<DofMap>, f: impl Fn(Point) -> [f64; 2]) -> Self {
        let nn = space.num_nodes();
        let mut coeffs = vec![0.0; 2 * nn];
        for (i, p) in space.node_points().iter().enumerate() {
            let v = f(*p);
            coeffs[i] = v[0];
            coeffs[nn + i] = v[1];
        }
        Self { space, kind: FieldKind::Velocity, coeffs }
    }

    /// Nodal interpolant of a scalar function at the vertices.
    pub fn interpolate_pressure(space: Arc<DofMap>, f: impl Fn(Point) -> f64) -> Self {
        let coeffs = space.mesh().vertices().iter().map(|p| f(*p)).collect();
        Self { space, kind: FieldKind::Pressure, coeffs }
    }

    pub fn space(&self) -> &Arc<DofMap> {
        &self.space
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn geometry(&self, cell: usize) -> CellGeometry {
        CellGeometry::new(self.space.mesh().cell_points(cell))
    }

    /// Velocity at barycentric point `l` of `cell`.
    pub fn velocity_at(&self, cell: usize, l: &[f64; 3]) -> [f64; 2] {
        debug_assert_eq!(self.kind, FieldKind::Velocity);
        let nn = self.space.num_nodes();
        let nodes = &self.space.cell_nodes()[cell];
        let phi = p2_values(l);
        let mut u = [0.0; 2];
        for k in 0..6 {
            u[0] += phi[k] * self.coeffs[nodes[k]];
            u[1] += phi[k] * self.coeffs[nn + nodes[k]];
        }
        u
    }

    /// `g[i][j] = ∂u_i/∂x_j`.
    pub fn velocity_gradient_at(&self, geom: &CellGeometry, cell: usize, l: &[f64; 3]) -> [[f64; 2]; 2] {
        let nn = self.space.num_nodes();
        let nodes = &self.space.cell_nodes()[cell];
        let dphi = p2_gradients(geom, l);
        let mut g = [[0.0; 2]; 2];
        for k in 0..6 {
            for c in 0..2 {
                let v = self.coeffs[c * nn + nodes[k]];
                g[c][0] += v * dphi[k][0];
                g[c][1] += v * dphi[k][1];
            }
        }
        g
    }

    pub fn pressure_at(&self, cell: usize, l: &[f64; 3]) -> f64 {
        debug_assert_eq!(self.kind, FieldKind::Pressure);
        let c = self.space.mesh().cells()[cell];
        l[0] * self.coeffs[c[0]] + l[1] * self.coeffs[c[1]] + l[2] * self.coeffs[c[2]]
    }

    /// Point evaluation; one value for pressure, two for velocity.
    pub fn evaluate(&self, p: Point) -> Result<Vec<f64>, FemError> {
        let mesh = self.space.mesh();
        let (cell, l) = self.space.locator().locate(mesh, p).ok_or(FemError::OutsideDomain { x: p.x, y: p.y })?;
        Ok(match self.kind {
            FieldKind::Velocity => self.velocity_at(cell, &l).to_vec(),
            FieldKind::Pressure => vec![self.pressure_at(cell, &l)],
        })
    }

    pub fn l2_norm(&self) -> f64 {
        let q = QuadratureRule::radon7();
        let mut s = 0.0;
        for c in 0..self.space.mesh().num_cells() {
            let area = self.space.mesh().cell_area(c);
            for (l, w) in q.points.iter().zip(&q.weights) {
                let v2 = match self.kind {
                    FieldKind::Velocity => {
                        let u = self.velocity_at(c, l);
                        u[0] * u[0] + u[1] * u[1]
                    }
                    FieldKind::Pressure => self.pressure_at(c, l).powi(2),
                };
                s += w * area * v2;
            }
        }
        s.sqrt()
    }

    pub fn h1_seminorm(&self) -> f64 {
        let q = QuadratureRule::radon7();
        let mut s = 0.0;
        for c in 0..self.space.mesh().num_cells() {
            let g = self.geometry(c);
            for (l, w) in q.points.iter().zip(&q.weights) {
                let v2 = match self.kind {
                    FieldKind::Velocity => self.velocity_gradient_at(&g, c, l).iter().flatten().map(|x| x * x).sum::<f64>(),
                    FieldKind::Pressure => {
                        let cell = self.space.mesh().cells()[c];
                        let (mut gx, mut gy) = (0.0, 0.0);
                        for k in 0..3 {
                            gx += self.coeffs[cell[k]] * g.grad_lambda[k][0];
                            gy += self.coeffs[cell[k]] * g.grad_lambda[k][1];
                        }
                        gx * gx + gy * gy
                    }
                };
                s += w * g.area * v2;
            }
        }
        s.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_square_mesh;

    fn space(n: usize) -> Arc<DofMap> {
        Arc::new(DofMap::new(Arc::new(unit_square_mesh(n))))
    }

    #[test]
    fn constant_norms() {
        let f = Field::interpolate_velocity(space(3), |_| [3.0, -4.0]);
        assert!((f.l2_norm() - 5.0).abs() < 1e-13);
        assert!(f.h1_seminorm() < 1e-13);
        let p = Field::interpolate_pressure(space(3), |_| -2.0);
        assert!((p.l2_norm() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn x_has_norm_one_over_root_three() {
        let f = Field::interpolate_velocity(space(4), |p| [p.x, 0.0]);
        assert!((f.l2_norm() - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        assert!((f.h1_seminorm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quadratics_reproduced_everywhere() {
        let q = |p: Point| [1.0 + 2.0 * p.x - p.y + 0.5 * p.x * p.x - 3.0 * p.x * p.y + p.y * p.y, p.x * p.y];
        let f = Field::interpolate_velocity(space(5), q);
        for k in 0..50 {
            let p = Point::new((k as f64 * 0.618_034).fract(), (k as f64 * 0.414_213_6).fract());
            let v = f.evaluate(p).unwrap();
            let e = q(p);
            assert!((v[0] - e[0]).abs() < 1e-12 && (v[1] - e[1]).abs() < 1e-12);
        }
        assert!(f.evaluate(Point::new(1.2, 0.5)).is_err());
    }

    #[test]
    fn length_checked() {
        assert!(Field::from_coeffs(space(1), FieldKind::Pressure, vec![0.0; 3]).is_err());
        assert!(Field::from_coeffs(space(1), FieldKind::Pressure, vec![0.0; 4]).is_ok());
    }
}
