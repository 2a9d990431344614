//! Time stepping: coupled, projection and penalty schemes with optional nudging.

mod problem;
mod run;
mod stepper;

pub use problem::{inflow_profile, BoundaryData, Forcing, Problem, INFLOW_PEAK};
pub use run::{run, RunOutput};
pub use stepper::{LinearSolver, Stepper};

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::cda::{CdaError, Interpolant};
use crate::fem::{DofMap, FemError, Field, FieldKind};
use crate::linalg::LinalgError;
use crate::truth::{MeasurementSource, TruthError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    CoupledBE,
    /// Not one of the assimilating schemes; used to produce reference data.
    CoupledBDF2,
    ProjBE,
    ProjBDF2,
    PenaltyBE,
    PenaltyBDF2,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 6] = [
        SchemeKind::CoupledBE,
        SchemeKind::CoupledBDF2,
        SchemeKind::ProjBE,
        SchemeKind::ProjBDF2,
        SchemeKind::PenaltyBE,
        SchemeKind::PenaltyBDF2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeKind::CoupledBE => "coupled_be",
            SchemeKind::CoupledBDF2 => "coupled_bdf2",
            SchemeKind::ProjBE => "proj_be",
            SchemeKind::ProjBDF2 => "proj_bdf2",
            SchemeKind::PenaltyBE => "penalty_be",
            SchemeKind::PenaltyBDF2 => "penalty_bdf2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    pub fn is_bdf2(self) -> bool {
        matches!(self, SchemeKind::CoupledBDF2 | SchemeKind::ProjBDF2 | SchemeKind::PenaltyBDF2)
    }

    pub fn is_projection(self) -> bool {
        matches!(self, SchemeKind::ProjBE | SchemeKind::ProjBDF2)
    }

    pub fn is_penalty(self) -> bool {
        matches!(self, SchemeKind::PenaltyBE | SchemeKind::PenaltyBDF2)
    }

    /// Backward Euler scheme of the same family.
    pub fn first_order(self) -> Self {
        match self {
            SchemeKind::CoupledBDF2 => SchemeKind::CoupledBE,
            SchemeKind::ProjBDF2 => SchemeKind::ProjBE,
            SchemeKind::PenaltyBDF2 => SchemeKind::PenaltyBE,
            k => k,
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverBackend {
    #[default]
    Direct,
    /// GMRES/CG with incomplete factorizations and Schur complements.
    Iterative,
}

impl SolverBackend {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverBackend::Direct => "direct",
            SolverBackend::Iterative => "iterative",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "direct" => Some(SolverBackend::Direct),
            "iterative" => Some(SolverBackend::Iterative),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub backend: SolverBackend,
    /// Relative residual every linear solve must reach.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { backend: SolverBackend::Direct, tol: 1e-10, max_iter: 2000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub nu: f64,
    pub dt: f64,
    pub end_time: f64,
    /// Penalty parameter, ignored by the other schemes.
    pub eps: f64,
    pub kind: SchemeKind,
    pub solver: SolverSettings,
}

impl SchemeConfig {
    pub fn new(kind: SchemeKind, nu: f64, dt: f64, end_time: f64) -> Self {
        Self { nu, dt, end_time, eps: 1.0, kind, solver: SolverSettings::default() }
    }

    pub fn validate(&self) -> Result<(), SchemeError> {
        let bad = |m: String| Err(SchemeError::Config(m));
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return bad(format!("nu must be positive, got {}", self.nu));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.end_time.is_finite() && self.end_time >= self.dt * (1.0 - 1e-12)) {
            return bad(format!("end_time {} is shorter than dt {}", self.end_time, self.dt));
        }
        if self.kind.is_penalty() && !(self.eps.is_finite() && self.eps > 0.0) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if !(self.solver.tol > 0.0 && self.solver.tol < 1.0) {
            return bad(format!("solver tolerance must lie in (0, 1), got {}", self.solver.tol));
        }
        if self.solver.max_iter == 0 {
            return bad("solver max_iter must be positive".into());
        }
        Ok(())
    }

    /// Number of steps to reach `end_time`; it must be an integer multiple of `dt`.
    pub fn num_steps(&self) -> Result<usize, SchemeError> {
        self.validate()?;
        let n = (self.end_time / self.dt).round();
        if (n * self.dt - self.end_time).abs() > 1e-9 * self.end_time.max(1.0) {
            return Err(SchemeError::Config(format!("end_time {} is not a multiple of dt {}", self.end_time, self.dt)));
        }
        Ok(n as usize)
    }
}

/// Assembled nudging data for one run.
#[derive(Debug)]
pub struct Nudging {
    pub mu: f64,
    pub interpolant: Interpolant,
    pub source: Arc<MeasurementSource>,
}

impl Nudging {
    pub fn new(mu: f64, interpolant: Interpolant, source: Arc<MeasurementSource>) -> Result<Self, SchemeError> {
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(SchemeError::Config(format!("mu must be non-negative, got {mu}")));
        }
        Ok(Self { mu, interpolant, source })
    }
}

/// Solution after `step` steps.
///
/// `u` is the velocity the scheme reports. For projection schemes it is the
/// intermediate velocity of the first substep and `u_tilde` its projection;
/// for the other schemes the two coincide. `u_prev` holds the previous level
/// used by second-order schemes (`u_tilde` for projection, `u` otherwise).
#[derive(Debug, Clone)]
pub struct State {
    pub step: usize,
    pub time: f64,
    pub u: Field,
    pub u_tilde: Field,
    pub u_prev: Option<Field>,
    pub p: Field,
}

impl State {
    /// Initial state with `ũ⁰ = u⁰` and zero pressure.
    pub fn initial(u0: Field) -> Result<Self, SchemeError> {
        if u0.kind() != FieldKind::Velocity {
            return Err(FemError::WrongKind.into());
        }
        let p = Field::zeros(u0.space().clone(), FieldKind::Pressure);
        Ok(Self { step: 0, time: 0.0, u_tilde: u0.clone(), u: u0, u_prev: None, p })
    }

    pub fn zero(space: Arc<DofMap>) -> Self {
        Self::initial(Field::zeros(space, FieldKind::Velocity)).expect("velocity field")
    }
}

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Cda(#[from] CdaError),
    #[error("step {step}: {what}: {source}")]
    Linalg {
        step: usize,
        what: &'static str,
        #[source]
        source: LinalgError,
    },
    #[error("step {step}: {what} did not converge (relative residual {residual:.3e})")]
    NotConverged { step: usize, what: &'static str, residual: f64 },
    #[error("step {step}: measurement unavailable: {source}")]
    Truth {
        step: usize,
        #[source]
        source: TruthError,
    },
    #[error("step {step}: {msg}")]
    Observer { step: usize, msg: String },
}
