//! Turns a [`RunSpec`] into a solve plus its artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::cda::{build_interpolant, CdaError};
use crate::config::{ConfigError, InitialCondition, MeshSource, Metric, ProblemKind, RunSpec, TruthSpec};
use crate::fem::{DofMap, Field, FieldKind};
use crate::mesh::{load_mesh, unit_square_mesh, ChannelMeshBuilder, CoarseGrid, Mesh, MeshError};
use crate::metrics::{drag_lift, emit_csv, h1_error_vs_truth, l2_error_vs_truth, MetricsError, TimeSeries};
use crate::schemes::{run, BoundaryData, Forcing, Nudging, Problem, SchemeError};
use crate::truth::{sample_truth, AnalyticSolution, ArchiveMeta, ArchiveWriter, MeasurementSource, StoredReference, TruthError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("mesh: {0}")]
    Mesh(#[from] MeshError),
    #[error("coarse grid: {0}")]
    Cda(#[from] CdaError),
    #[error("truth: {0}")]
    Truth(#[from] TruthError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error("writing {path}: {source}")]
    Output { path: PathBuf, source: MetricsError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Files written by a finished run.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub results: PathBuf,
    pub manifest: PathBuf,
    pub archive: Option<ArchiveMeta>,
    pub series: TimeSeries,
    pub warnings: Vec<String>,
}

pub fn build_mesh(src: &MeshSource) -> Result<Mesh, MeshError> {
    match src {
        MeshSource::UnitSquare { n } => Ok(unit_square_mesh(*n)),
        MeshSource::Channel { near_h, far_h, wake_end } => ChannelMeshBuilder { near_h: *near_h, far_h: *far_h, wake_end: *wake_end }.build(),
        MeshSource::File(p) => load_mesh(p),
    }
}

/// Manifest text: the canonical config echo headed by version and mesh hash comments.
pub fn manifest_text(spec: &RunSpec, mesh_hash: &str) -> String {
    format!("# nudge-ns {}\n# mesh_hash {mesh_hash}\n{}", env!("CARGO_PKG_VERSION"), spec.to_config_text())
}

fn analytic(spec: &RunSpec) -> AnalyticSolution {
    AnalyticSolution::new(spec.scheme.nu)
}

fn problem_for(spec: &RunSpec, space: Arc<DofMap>) -> Problem {
    match spec.problem {
        ProblemKind::Manufactured => {
            let a = analytic(spec);
            Problem::new(space, BoundaryData::Analytic(a), Forcing::Analytic(a))
        }
        ProblemKind::Channel => Problem::new(space, BoundaryData::Channel, Forcing::Zero),
    }
}

fn truth_for(spec: &RunSpec, mesh: &Mesh) -> Result<Option<Arc<MeasurementSource>>, ExperimentError> {
    Ok(match &spec.truth {
        TruthSpec::None => None,
        TruthSpec::Analytic => Some(Arc::new(MeasurementSource::Analytic(analytic(spec)))),
        TruthSpec::Archive { path, policy } => Some(Arc::new(MeasurementSource::Stored(StoredReference::open(path, mesh, *policy)?))),
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io { path: path.to_path_buf(), source }
}

/// Runs one spec, writing `results.csv` and `manifest` into the output directory
/// and, if requested, a snapshot archive.
pub fn run_experiment(spec: &RunSpec) -> Result<RunArtifacts, ExperimentError> {
    spec.check_files()?;
    if !spec.sweep.is_empty() {
        return Err(ConfigError::Invalid { line: 0, msg: "spec still has [sweep] entries; expand it with variants()".into() }.into());
    }
    let mesh = build_mesh(&spec.mesh)?;
    let hash = mesh.hash_hex();
    let space = Arc::new(DofMap::new(Arc::new(mesh)));
    let truth = truth_for(spec, space.mesh())?;
    let problem = problem_for(spec, space.clone());
    let nudge = match (&spec.nudge, &truth) {
        (Some(n), Some(src)) if n.mu > 0.0 => {
            let itp = build_interpolant(&space, CoarseGrid::covering(space.mesh(), n.n)?, n.mode)?;
            Some(Nudging::new(n.mu, itp, src.clone())?)
        }
        _ => None,
    };
    let u0 = match (spec.initial, &truth) {
        (InitialCondition::Truth, Some(src)) => sample_truth(src, &space, 0.0)?,
        _ => Field::zeros(space.clone(), FieldKind::Velocity),
    };

    let dir = &spec.output.dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let manifest = dir.join("manifest");
    fs::write(&manifest, manifest_text(spec, &hash)).map_err(io_err(&manifest))?;

    let mut writer = match &spec.output.archive {
        Some((path, stride)) => {
            let meta = ArchiveMeta { mesh_hash: hash.clone(), dt: spec.scheme.dt, stride: *stride, count: 0, nu: spec.scheme.nu, ndofs: space.num_velocity_dofs() };
            Some(ArchiveWriter::create(path, meta)?)
        }
        None => None,
    };
    let metrics = &spec.output.metrics;
    let mut series = TimeSeries::new(metrics.iter().map(|m| m.as_str()));
    let every = spec.output.every;
    let nu = spec.scheme.nu;
    let out = run(&spec.scheme, problem, nudge.as_ref(), u0, &mut |s| {
        if let Some(w) = writer.as_mut() {
            w.offer(s.step, s.u.coeffs()).map_err(|e| e.to_string())?;
        }
        if s.step % every != 0 {
            return Ok(());
        }
        let mut row = Vec::with_capacity(metrics.len());
        let mut dl = None;
        for m in metrics {
            let v = match m {
                Metric::VelocityNorm => s.u.l2_norm(),
                Metric::L2Error | Metric::H1Error => {
                    let src = truth.as_deref().ok_or("error metrics need a truth source")?;
                    let r = if *m == Metric::L2Error { l2_error_vs_truth(&s.u, src, s.time) } else { h1_error_vs_truth(&s.u, src, s.time) };
                    r.map_err(|e| e.to_string())?
                }
                Metric::Drag | Metric::Lift => {
                    let (d, l) = match dl {
                        Some(v) => v,
                        None => *dl.insert(drag_lift(&s.u, &s.p, nu).map_err(|e| e.to_string())?),
                    };
                    if *m == Metric::Drag {
                        d
                    } else {
                        l
                    }
                }
            };
            row.push(v);
        }
        series.push(s.time, row).map_err(|e| e.to_string())
    })?;
    let archive = writer.map(|w| w.finish()).transpose()?;
    let results = dir.join("results.csv");
    emit_csv(&series, &results).map_err(|source| ExperimentError::Output { path: results.clone(), source })?;
    Ok(RunArtifacts { results, manifest, archive, series, warnings: out.warnings })
}

/// Expands `[sweep]` and runs every variant in a subdirectory named after its label.
pub fn sweep_runs(spec: &RunSpec) -> Result<Vec<(String, RunSpec)>, ExperimentError> {
    let variants = spec.variants()?;
    if variants.len() == 1 && variants[0].0.is_empty() {
        return Ok(variants);
    }
    Ok(variants
        .into_iter()
        .map(|(label, mut v)| {
            v.output.dir = spec.output.dir.join(label.replace(',', "_"));
            if let Some((p, _)) = v.output.archive.as_mut() {
                *p = p.join(label.replace(',', "_"));
            }
            (label, v)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;

    #[test]
    fn manifest_reparses_to_spec() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            "[mesh]\nkind = unit_square\nn = 2\n[scheme]\nscheme = proj_be\ndt = 0.1\nend_time = 0.2\n[cda]\nmu = 10\nN = 2\n[truth]\nsource = analytic\n[output]\ndir = {}\nmetrics = l2_error, velocity_norm\narchive = {}\n",
            dir.path().join("o").display(),
            dir.path().join("a").display()
        );
        let spec = parse_config_str(&text).unwrap();
        let art = run_experiment(&spec).unwrap();
        let echo = fs::read_to_string(&art.manifest).unwrap();
        assert!(echo.starts_with("# nudge-ns "));
        assert_eq!(parse_config_str(&echo).unwrap(), spec);
        assert_eq!(art.series.len(), 3);
        assert_eq!(art.archive.unwrap().count, 3);
        let again = run_experiment(&spec).unwrap();
        assert_eq!(fs::read(&art.results).unwrap(), fs::read(&again.results).unwrap());
    }

    #[test]
    fn sweep_dirs() {
        let text = "[mesh]\nkind = unit_square\nn = 2\n[scheme]\nscheme = proj_be\ndt = 0.1\nend_time = 0.1\n[output]\ndir = o\n[sweep]\nscheme.dt = 0.1, 0.05\n";
        let runs = sweep_runs(&parse_config_str(text).unwrap()).unwrap();
        assert_eq!(runs[1].1.output.dir, PathBuf::from("o/scheme.dt=0.05"));
    }
}
