use crate::mesh::Point;

/// `u = (eᵗ cos y, eᵗ sin x)`, `p = (x − y)(1 + t)` with the forcing that
/// makes them solve the Navier-Stokes equations at viscosity `nu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticSolution {
    pub nu: f64,
}

impl AnalyticSolution {
    pub fn new(nu: f64) -> Self {
        Self { nu }
    }

    pub fn velocity(&self, p: Point, t: f64) -> [f64; 2] {
        let et = t.exp();
        [et * p.y.cos(), et * p.x.sin()]
    }

    /// `g[i][j] = ∂u_i/∂x_j`.
    pub fn velocity_gradient(&self, p: Point, t: f64) -> [[f64; 2]; 2] {
        let et = t.exp();
        [[0.0, -et * p.y.sin()], [et * p.x.cos(), 0.0]]
    }

    pub fn pressure(&self, p: Point, t: f64) -> f64 {
        (p.x - p.y) * (1.0 + t)
    }

    pub fn forcing(&self, p: Point, t: f64) -> [f64; 2] {
        let et = t.exp();
        let e2t = (2.0 * t).exp();
        let (sx, cx, sy, cy) = (p.x.sin(), p.x.cos(), p.y.sin(), p.y.cos());
        [
            et * cy - e2t * sx * sy + (1.0 + t) + self.nu * et * cy,
            et * sx + e2t * cx * cy - (1.0 + t) + self.nu * et * sx,
        ]
    }
}
