//! Coarse interpolation `I_H` and the nudging term `μ(I_H(u − w), v)`.

mod clip;
mod interpolant;

pub use clip::clip_triangle;
pub use interpolant::{Interpolant, InterpolantMode};

use std::f64::consts::PI;

use thiserror::Error;

use crate::fem::DofMap;
use crate::linalg::SparseMatrix;
use crate::mesh::{CoarseGrid, MeshError, Point};

#[derive(Debug, Error)]
pub enum CdaError {
    #[error("coarse grid covers area {covered} of a fine mesh with area {total}")]
    NotCovered { covered: f64, total: f64 },
    #[error("point ({x}, {y}) is not inside the mesh")]
    OutsideDomain { x: f64, y: f64 },
    #[error("truth vector has length {found}, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Builds `I_H` on an `n × n` coarse grid over the fine mesh's bounding box.
pub fn build_interpolant(space: &DofMap, coarse: CoarseGrid, mode: InterpolantMode) -> Result<Interpolant, CdaError> {
    Interpolant::new(space, coarse, mode)
}

/// Velocity matrix `J` with `vᵀ J u = (I_H u, v)`; scale by μ at the call site.
pub fn nudging_matrix(itp: &Interpolant, space: &DofMap) -> SparseMatrix {
    itp.nudging_matrix(space)
}

/// Load vector `(I_H w, v)` for a velocity truth `w` in fine dof order.
pub fn nudging_rhs(j: &SparseMatrix, w: &[f64]) -> Result<Vec<f64>, CdaError> {
    if w.len() != j.ncols() {
        return Err(CdaError::LengthMismatch { expected: j.ncols(), found: w.len() });
    }
    Ok(j.spmv(w).expect("length checked"))
}

/// Empirical interpolation constants over a fixed battery of smooth fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiEstimate {
    /// `max ‖I_H φ‖ / ‖φ‖`.
    pub stability: f64,
    /// `max ‖I_H φ − φ‖ / (H ‖∇φ‖)`.
    pub approximation: f64,
}

impl CiEstimate {
    pub fn ci(&self) -> f64 {
        self.stability.max(self.approximation)
    }
}

/// The battery: trigonometric modes on the bounding box, scaled to it.
pub fn ci_battery(space: &DofMap) -> Vec<Vec<f64>> {
    let (x0, y0, x1, y1) = space.mesh().bounding_box();
    let s = |p: Point| ((p.x - x0) / (x1 - x0), (p.y - y0) / (y1 - y0));
    let fields: Vec<Box<dyn Fn(f64, f64) -> f64>> = vec![
        Box::new(|x, y| (2.0 * PI * x).sin() + (2.0 * PI * y).cos()),
        Box::new(|x, y| (PI * x).cos() * (PI * y).cos()),
        Box::new(|x, y| (3.0 * PI * x).sin() * (2.0 * PI * y).sin() + 0.5),
        Box::new(|x, y| (x * x - y) * (PI * (x + y)).cos()),
        Box::new(|x, y| (4.0 * PI * x * y).sin()),
        Box::new(|x, y| (-(x - 0.3).powi(2) * 8.0 - (y - 0.6).powi(2) * 8.0).exp()),
    ];
    fields
        .iter()
        .map(|f| {
            space
                .node_points()
                .iter()
                .map(|p| {
                    let (x, y) = s(*p);
                    f(x, y)
                })
                .collect()
        })
        .collect()
}

pub fn estimate_ci(space: &DofMap, itp: &Interpolant) -> CiEstimate {
    let h = itp.coarse.spacing;
    let mut est = CiEstimate { stability: 0.0, approximation: 0.0 };
    for phi in ci_battery(space) {
        let (ih, err) = itp.norms(space, &phi);
        let norm = l2_scalar(space, &phi);
        let grad = interpolant::scalar_h1_seminorm(space, &phi);
        if norm > 0.0 {
            est.stability = est.stability.max(ih / norm);
        }
        if grad > 0.0 {
            est.approximation = est.approximation.max(err / (h * grad));
        }
    }
    est
}

fn l2_scalar(space: &DofMap, phi: &[f64]) -> f64 {
    let m = crate::fem::assembly::scalar_p2_mass(space);
    let mphi = m.spmv(phi).expect("length");
    phi.iter().zip(&mphi).map(|(a, b)| a * b).sum::<f64>().sqrt()
}

/// Warning text when `μ H² > ν / (2 C_I²)`; `None` when the bound holds or μ = 0.
pub fn mu_guard(mu: f64, h: f64, nu: f64, ci: f64) -> Option<String> {
    if mu > 0.0 && mu * h * h > nu / (2.0 * ci * ci) {
        Some(format!("mu*H^2 = {:.3e} exceeds nu/(2 C_I^2) = {:.3e} (mu = {mu}, H = {h:.4e}, C_I = {ci:.3})", mu * h * h, nu / (2.0 * ci * ci)))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assembly::scalar_p2_mass;
    use crate::mesh::unit_square_mesh;
    use std::sync::Arc;

    fn setup(n: usize, nc: usize, mode: InterpolantMode) -> (DofMap, Interpolant) {
        let space = DofMap::new(Arc::new(unit_square_mesh(n)));
        let g = CoarseGrid::covering(space.mesh(), nc).unwrap();
        let itp = build_interpolant(&space, g, mode).unwrap();
        (space, itp)
    }

    #[test]
    fn constants_reproduced() {
        for mode in [InterpolantMode::PiecewiseConstantAverage, InterpolantMode::CoarseNodalP1] {
            let (space, itp) = setup(6, 4, mode);
            let c = itp.restrict(&vec![2.5; space.num_nodes()]);
            assert!(c.iter().all(|v| (v - 2.5).abs() < 1e-13));
            let j = itp.scalar_nudging_matrix(&space);
            let m = scalar_p2_mass(&space);
            let one = vec![1.0; space.num_nodes()];
            let (a, b) = (j.spmv(&one).unwrap(), m.spmv(&one).unwrap());
            assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-13));
        }
    }

    #[test]
    fn idempotent_on_its_range() {
        for mode in [InterpolantMode::PiecewiseConstantAverage, InterpolantMode::CoarseNodalP1] {
            let (_, itp) = setup(8, 4, mode);
            let c: Vec<f64> = (0..itp.coarse_len()).map(|k| (k as f64 * 0.37).sin()).collect();
            let again = itp.reapply(&c);
            assert!(c.iter().zip(&again).all(|(a, b)| (a - b).abs() < 1e-10));
        }
    }

    #[test]
    fn guard() {
        assert!(mu_guard(0.0, 1.0, 1.0, 1.0).is_none());
        assert!(mu_guard(1.0, 0.5, 1.0, 1.0).is_none());
        assert!(mu_guard(1e5, 1.0 / 32.0, 1.0, 1.0).is_some());
    }

    #[test]
    fn channel_drops_block_cells() {
        let mesh = crate::mesh::channel_block_mesh(0.02).unwrap();
        let space = DofMap::new(Arc::new(mesh));
        // 22 × 41 cells of 0.1 × 0.01: the block interior [0.15,0.25]² swallows whole cells
        let g = CoarseGrid::covering(space.mesh(), 22).unwrap();
        let itp = build_interpolant(&space, g, InterpolantMode::PiecewiseConstantAverage).unwrap();
        assert!(itp.coarse_len() <= 22 * 22);
    }
}
