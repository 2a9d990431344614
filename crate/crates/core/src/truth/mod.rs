//! Sources of the true velocity `w` used for nudging and error measurement.

mod analytic;
pub mod archive;
mod reference;

pub use analytic::AnalyticSolution;
pub use archive::{read_meta, ArchiveMeta, ArchiveWriter};
pub use reference::generate_reference;

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::fem::{DofMap, Field, FieldKind};
use crate::mesh::Mesh;

#[derive(Debug, Error)]
pub enum TruthError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("archive meta line {line}: {msg}")]
    Meta { line: usize, msg: String },
    #[error("snapshot has {found} bytes, expected {expected}")]
    SnapshotSize { expected: usize, found: usize },
    #[error("archive was written for mesh {expected}, but the run uses mesh {found}")]
    MeshMismatch { expected: String, found: String },
    #[error("archive stores {expected} dofs per snapshot, the space has {found}")]
    DofMismatch { expected: usize, found: usize },
    #[error("no truth sample for t = {t} ({reason})")]
    NotCovered { t: f64, reason: String },
}

/// How stored snapshots answer requests between snapshot times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimePolicy {
    /// Only snapshot times are answered.
    #[default]
    Strict,
    /// Linear interpolation between neighbouring snapshots.
    Linear,
}

impl TimePolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            TimePolicy::Strict => "strict",
            TimePolicy::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "strict" => Some(TimePolicy::Strict),
            "linear" => Some(TimePolicy::Linear),
            _ => None,
        }
    }
}

/// Snapshot index and weight: the answer is `(1 − θ) s[k] + θ s[k + 1]`.
fn locate_time(t: f64, interval: f64, count: usize, policy: TimePolicy) -> Result<(usize, f64), TruthError> {
    let not = |reason: String| TruthError::NotCovered { t, reason };
    if !t.is_finite() || t < -1e-12 * interval {
        return Err(not("negative or non-finite time".into()));
    }
    let s = t / interval;
    let k = s.round();
    let tol = 1e-8 * s.abs().max(1.0);
    if (s - k).abs() <= tol {
        let k = k as usize;
        if k >= count {
            return Err(not(format!("last snapshot is {}", count.saturating_sub(1))));
        }
        return Ok((k, 0.0));
    }
    match policy {
        TimePolicy::Strict => Err(not(format!("not a snapshot time (interval {interval})"))),
        TimePolicy::Linear => {
            let k0 = s.floor() as usize;
            if k0 + 1 >= count {
                return Err(not(format!("beyond last snapshot {}", count.saturating_sub(1))));
            }
            Ok((k0, s - k0 as f64))
        }
    }
}

fn blend(a: &[f64], b: Option<&[f64]>, theta: f64) -> Vec<f64> {
    match b {
        None => a.to_vec(),
        Some(b) => a.iter().zip(b).map(|(x, y)| (1.0 - theta) * x + theta * y).collect(),
    }
}

/// Snapshots read lazily from an archive directory.
#[derive(Debug)]
pub struct StoredReference {
    dir: PathBuf,
    meta: ArchiveMeta,
    policy: TimePolicy,
    cache: Mutex<Vec<(usize, Arc<Vec<f64>>)>>,
}

impl StoredReference {
    /// Opens an archive and checks that it was written on `mesh`.
    pub fn open(dir: impl AsRef<Path>, mesh: &Mesh, policy: TimePolicy) -> Result<Self, TruthError> {
        let dir = dir.as_ref().to_path_buf();
        let meta = read_meta(&dir)?;
        let found = mesh.hash_hex();
        if meta.mesh_hash != found {
            return Err(TruthError::MeshMismatch { expected: meta.mesh_hash, found });
        }
        Ok(Self { dir, meta, policy, cache: Mutex::new(Vec::new()) })
    }

    pub fn meta(&self) -> &ArchiveMeta {
        &self.meta
    }

    pub fn snapshot(&self, k: usize) -> Result<Arc<Vec<f64>>, TruthError> {
        let mut cache = self.cache.lock().expect("cache lock");
        if let Some((_, v)) = cache.iter().find(|(i, _)| *i == k) {
            return Ok(v.clone());
        }
        let bytes = std::fs::read(archive::snapshot_path(&self.dir, k))?;
        let v = Arc::new(archive::decode_snapshot(&bytes, self.meta.ndofs)?);
        if cache.len() >= 3 {
            cache.remove(0);
        }
        cache.push((k, v.clone()));
        Ok(v)
    }

    pub fn sample(&self, t: f64) -> Result<Vec<f64>, TruthError> {
        let (k, theta) = locate_time(t, self.meta.interval(), self.meta.count, self.policy)?;
        let a = self.snapshot(k)?;
        if theta == 0.0 {
            return Ok(a.to_vec());
        }
        let b = self.snapshot(k + 1)?;
        Ok(blend(&a, Some(&b), theta))
    }
}

/// Snapshots held in memory, e.g. a previously computed trajectory.
#[derive(Debug, Clone)]
pub struct MemoryReference {
    pub interval: f64,
    pub snapshots: Vec<Vec<f64>>,
    pub policy: TimePolicy,
}

impl MemoryReference {
    pub fn sample(&self, t: f64) -> Result<Vec<f64>, TruthError> {
        let (k, theta) = locate_time(t, self.interval, self.snapshots.len(), self.policy)?;
        Ok(blend(&self.snapshots[k], (theta != 0.0).then(|| self.snapshots[k + 1].as_slice()), theta))
    }
}

/// Provider of `w(t)` on the fine velocity space.
#[derive(Debug)]
pub enum MeasurementSource {
    Analytic(AnalyticSolution),
    Stored(StoredReference),
    Memory(MemoryReference),
}

impl MeasurementSource {
    /// Velocity coefficients of `w(t)` in the dof order of `space`.
    pub fn sample_coeffs(&self, space: &Arc<DofMap>, t: f64) -> Result<Vec<f64>, TruthError> {
        let v = match self {
            MeasurementSource::Analytic(a) => return Ok(Field::interpolate_velocity(space.clone(), |p| a.velocity(p, t)).into_coeffs()),
            MeasurementSource::Stored(s) => s.sample(t)?,
            MeasurementSource::Memory(m) => m.sample(t)?,
        };
        if v.len() != space.num_velocity_dofs() {
            return Err(TruthError::DofMismatch { expected: v.len(), found: space.num_velocity_dofs() });
        }
        Ok(v)
    }
}

/// `w(t)` as a velocity field.
pub fn sample_truth(src: &MeasurementSource, space: &Arc<DofMap>, t: f64) -> Result<Field, TruthError> {
    let v = src.sample_coeffs(space, t)?;
    Ok(Field::from_coeffs(space.clone(), FieldKind::Velocity, v).expect("length checked"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_square_mesh;

    #[test]
    fn time_lookup() {
        assert_eq!(locate_time(0.004, 0.002, 3, TimePolicy::Strict).unwrap(), (2, 0.0));
        assert!(locate_time(0.006, 0.002, 3, TimePolicy::Strict).is_err());
        assert!(locate_time(0.003, 0.002, 3, TimePolicy::Strict).is_err());
        let (k, th) = locate_time(0.003, 0.002, 3, TimePolicy::Linear).unwrap();
        assert_eq!(k, 1);
        assert!((th - 0.5).abs() < 1e-12);
        assert!(locate_time(0.0041, 0.002, 3, TimePolicy::Linear).is_err());
    }

    #[test]
    fn linear_policy_blends_two_snapshots() {
        let m = MemoryReference { interval: 0.5, snapshots: vec![vec![1.0, 2.0], vec![3.0, -2.0]], policy: TimePolicy::Linear };
        assert_eq!(m.sample(0.125).unwrap(), vec![1.5, 1.0]);
        assert_eq!(m.sample(0.5).unwrap(), vec![3.0, -2.0]);
    }

    #[test]
    fn stored_reference_round_trip_and_mesh_check() {
        let mesh = unit_square_mesh(2);
        let space = Arc::new(DofMap::new(Arc::new(mesh.clone())));
        let n = space.num_velocity_dofs();
        let dir = tempfile::tempdir().unwrap();
        let meta = ArchiveMeta { mesh_hash: mesh.hash_hex(), dt: 0.1, stride: 1, count: 0, nu: 1.0, ndofs: n };
        let mut w = ArchiveWriter::create(dir.path(), meta).unwrap();
        let snaps: Vec<Vec<f64>> = (0..3).map(|k| (0..n).map(|i| (i * 7 + k) as f64 / 3.0).collect()).collect();
        for (k, s) in snaps.iter().enumerate() {
            w.offer(k, s).unwrap();
        }
        w.finish().unwrap();
        let src = MeasurementSource::Stored(StoredReference::open(dir.path(), &mesh, TimePolicy::Strict).unwrap());
        let f = sample_truth(&src, &space, 0.2).unwrap();
        assert!(f.coeffs().iter().zip(&snaps[2]).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!(src.sample_coeffs(&space, 0.15).is_err());
        let other = unit_square_mesh(3);
        assert!(matches!(StoredReference::open(dir.path(), &other, TimePolicy::Strict), Err(TruthError::MeshMismatch { .. })));
    }

    #[test]
    fn analytic_sample_is_nodal_interpolant() {
        let space = Arc::new(DofMap::new(Arc::new(unit_square_mesh(2))));
        let a = AnalyticSolution::new(1.0);
        let f = sample_truth(&MeasurementSource::Analytic(a), &space, 0.0).unwrap();
        let g = Field::interpolate_velocity(space.clone(), |p| a.velocity(p, 0.0));
        assert_eq!(f.coeffs(), g.coeffs());
    }
}
