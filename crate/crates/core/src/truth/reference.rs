use std::path::Path;

use super::{ArchiveMeta, ArchiveWriter};
use crate::fem::{Field, FieldKind};
use crate::schemes::{run, Problem, SchemeConfig, SchemeError, SchemeKind};

/// Runs a coupled scheme from rest and stores the velocity every `stride` steps.
pub fn generate_reference(problem: Problem, cfg: &SchemeConfig, dir: impl AsRef<Path>, stride: usize) -> Result<ArchiveMeta, SchemeError> {
    if !matches!(cfg.kind, SchemeKind::CoupledBE | SchemeKind::CoupledBDF2) {
        return Err(SchemeError::Config(format!("reference runs use a coupled scheme, not {}", cfg.kind)));
    }
    if stride == 0 {
        return Err(SchemeError::Config("archive stride must be positive".into()));
    }
    let space = problem.space.clone();
    let meta = ArchiveMeta { mesh_hash: space.mesh().hash_hex(), dt: cfg.dt, stride, count: 0, nu: cfg.nu, ndofs: space.num_velocity_dofs() };
    let mut writer = ArchiveWriter::create(dir, meta).map_err(|e| SchemeError::Truth { step: 0, source: e })?;
    let u0 = Field::zeros(space, FieldKind::Velocity);
    run(cfg, problem, None, u0, &mut |s| writer.offer(s.step, s.u.coeffs()).map_err(|e| e.to_string()))?;
    writer.finish().map_err(|e| SchemeError::Truth { step: 0, source: e })
}
