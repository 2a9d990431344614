use std::sync::Arc;

use crate::fem::{load_vector, DirichletBc, DofMap, FemError};
use crate::mesh::{BoundaryTag, Point, CHANNEL_HEIGHT};
use crate::truth::AnalyticSolution;

/// Peak of the channel inflow parabola, reached at mid-height.
pub const INFLOW_PEAK: f64 = 1.5;

/// `u₁(y) = 6 y (0.41 − y) / 0.41²`.
pub fn inflow_profile(y: f64) -> f64 {
    6.0 / (CHANNEL_HEIGHT * CHANNEL_HEIGHT) * y * (CHANNEL_HEIGHT - y)
}

/// Velocity prescribed on the whole boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryData {
    /// No-slip everywhere.
    Zero,
    /// Trace of the analytic solution at the current time.
    Analytic(AnalyticSolution),
    /// Parabolic profile on inflow and outflow edges, no-slip on walls and block.
    Channel,
}

/// Right-hand side `f` of the momentum equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Forcing {
    Zero,
    Analytic(AnalyticSolution),
}

/// Space plus data of one flow problem.
#[derive(Debug, Clone)]
pub struct Problem {
    pub space: Arc<DofMap>,
    pub boundary: BoundaryData,
    pub forcing: Forcing,
}

impl Problem {
    pub fn new(space: Arc<DofMap>, boundary: BoundaryData, forcing: Forcing) -> Self {
        Self { space, boundary, forcing }
    }

    fn node_value(&self, node: usize, open: &[bool], t: f64) -> [f64; 2] {
        let p = self.space.node_points()[node];
        match self.boundary {
            BoundaryData::Zero => [0.0, 0.0],
            BoundaryData::Analytic(a) => a.velocity(p, t),
            BoundaryData::Channel => {
                if open[node] {
                    [inflow_profile(p.y), 0.0]
                } else {
                    [0.0, 0.0]
                }
            }
        }
    }

    fn open_nodes(&self) -> Vec<bool> {
        let mut open = vec![false; self.space.num_nodes()];
        if self.boundary == BoundaryData::Channel {
            for tag in [BoundaryTag::Inflow, BoundaryTag::Outflow] {
                for &n in self.space.boundary_nodes_with_tag(tag) {
                    open[n] = true;
                }
            }
        }
        open
    }

    /// Boundary values per component on the scalar P2 nodes.
    pub fn scalar_bcs(&self, t: f64) -> [DirichletBc; 2] {
        let open = self.open_nodes();
        let nodes = self.space.boundary_nodes();
        let vals: Vec<[f64; 2]> = nodes.iter().map(|&n| self.node_value(n, &open, t)).collect();
        let make = |c: usize| DirichletBc::new(nodes.iter().zip(&vals).map(|(n, v)| (*n, v[c]))).expect("one value per node");
        [make(0), make(1)]
    }

    /// Boundary values on the velocity dofs.
    pub fn velocity_bc(&self, t: f64) -> DirichletBc {
        let nn = self.space.num_nodes();
        let [b0, b1] = self.scalar_bcs(t);
        let pairs = b0.dofs().iter().zip(b0.values()).map(|(d, v)| (*d, *v)).chain(b1.dofs().iter().zip(b1.values()).map(|(d, v)| (nn + d, *v)));
        DirichletBc::new(pairs).expect("components are disjoint")
    }

    /// `(f(t), v)` on the velocity dofs.
    pub fn load(&self, t: f64) -> Vec<f64> {
        match self.forcing {
            Forcing::Zero => vec![0.0; self.space.num_velocity_dofs()],
            Forcing::Analytic(a) => load_vector(&self.space, 7, |p: Point| a.forcing(p, t)),
        }
    }

    pub fn check_len(&self, v: &[f64]) -> Result<(), FemError> {
        if v.len() != self.space.num_velocity_dofs() {
            return Err(FemError::LengthMismatch { expected: self.space.num_velocity_dofs(), found: v.len() });
        }
        Ok(())
    }
}
