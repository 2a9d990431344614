use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use clap::{Parser, Subcommand};

use nudge_ns::config::{parse_config, RunSpec};
use nudge_ns::experiment::{build_mesh, run_experiment, sweep_runs};
use nudge_ns::fem::DofMap;
use nudge_ns::mesh::{barycentric_refine, load_mesh, save_mesh, unit_square_mesh, BoundaryTag, ChannelMeshBuilder, Mesh, CHANNEL_LENGTH};
use nudge_ns::schemes::SchemeKind;

#[derive(Parser)]
#[command(name = "nudge-ns", version, about = "Navier-Stokes projection and penalty runs with data assimilation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one configuration (or every variant of its [sweep] section).
    Run {
        config: PathBuf,
        /// Validate and print the resolved configuration without solving.
        #[arg(long)]
        dry_run: bool,
    },
    /// Run a configuration over one or more parameter lists.
    Sweep {
        config: PathBuf,
        /// `key=v1,v2,...`; repeat for a cartesian product.
        #[arg(long, required = true)]
        vary: Vec<String>,
        #[arg(long)]
        dry_run: bool,
    },
    /// Generate or inspect meshes.
    Mesh {
        #[command(subcommand)]
        cmd: MeshCmd,
    },
    /// Reference trajectories for nudging.
    Reference {
        #[command(subcommand)]
        cmd: ReferenceCmd,
    },
}

#[derive(Subcommand)]
enum MeshCmd {
    /// Write a generated mesh.
    Gen {
        /// `unit_square` or `channel`.
        #[arg(long)]
        kind: String,
        /// Cells per side of the unit square.
        #[arg(long)]
        n: Option<usize>,
        /// Channel spacing near the block.
        #[arg(long)]
        h: Option<f64>,
        /// Channel spacing away from the block (defaults to `h`).
        #[arg(long)]
        far_h: Option<f64>,
        #[arg(long)]
        wake_end: Option<f64>,
        /// Split every cell around its barycenter.
        #[arg(long)]
        refine: bool,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Print mesh statistics.
    Info { path: PathBuf },
}

#[derive(Subcommand)]
enum ReferenceCmd {
    /// Run a coupled configuration that writes a snapshot archive.
    Gen { config: PathBuf },
}

fn threads() -> usize {
    std::env::var("NUDGE_NS_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0).unwrap_or(1)
}

fn run_one(label: &str, spec: &RunSpec) -> Result<(), String> {
    let tag = if label.is_empty() { String::new() } else { format!("[{label}] ") };
    let art = run_experiment(spec).map_err(|e| format!("{tag}{e}"))?;
    for w in &art.warnings {
        eprintln!("{tag}warning: {w}");
    }
    println!("{tag}wrote {}", art.results.display());
    if let Some(meta) = &art.archive {
        println!("{tag}archived {} snapshots", meta.count);
    }
    Ok(())
}

/// Runs independent specs on up to `NUDGE_NS_THREADS` threads.
fn run_all(spec: &RunSpec, dry_run: bool) -> Result<(), String> {
    let runs = sweep_runs(spec).map_err(|e| e.to_string())?;
    if dry_run {
        for (label, v) in &runs {
            if !label.is_empty() {
                println!("# variant {label}");
            }
            print!("{}", v.to_config_text());
            let mesh = build_mesh(&v.mesh).map_err(|e| e.to_string())?;
            println!("# mesh: {} cells, hash {}\n", mesh.num_cells(), mesh.hash_hex());
        }
        return Ok(());
    }
    let next = AtomicUsize::new(0);
    let errors = Mutex::new(Vec::new());
    std::thread::scope(|s| {
        for _ in 0..threads().min(runs.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((label, v)) = runs.get(i) else { break };
                if let Err(e) = run_one(label, v) {
                    errors.lock().expect("error list").push(e);
                }
            });
        }
    });
    let errors = errors.into_inner().expect("error list");
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors.join("\n"))
    }
}

fn mesh_gen(kind: &str, n: Option<usize>, h: Option<f64>, far_h: Option<f64>, wake_end: Option<f64>, refine: bool) -> Result<Mesh, String> {
    let m = match kind {
        "unit_square" => unit_square_mesh(n.filter(|&n| n > 0).ok_or("unit_square needs --n > 0")?),
        "channel" => {
            let h = h.ok_or("channel needs --h")?;
            let b = ChannelMeshBuilder { near_h: h, far_h: far_h.unwrap_or(h), wake_end: wake_end.unwrap_or(CHANNEL_LENGTH) };
            b.build().map_err(|e| e.to_string())?
        }
        _ => return Err(format!("unknown mesh kind {kind:?} (expected unit_square or channel)")),
    };
    Ok(if refine { barycentric_refine(&m) } else { m })
}

fn mesh_info(path: &Path) -> Result<(), String> {
    let m = load_mesh(path).map_err(|e| e.to_string())?;
    let (x0, y0, x1, y1) = m.bounding_box();
    println!("vertices      {}", m.num_vertices());
    println!("cells         {}", m.num_cells());
    println!("edges         {}", m.num_edges());
    println!("area          {:.6}", m.total_area());
    println!("max diameter  {:.6}", m.max_diameter());
    println!("bounding box  [{x0}, {x1}] x [{y0}, {y1}]");
    for tag in BoundaryTag::ALL.into_iter().filter(|t| m.has_tag(*t)) {
        println!("boundary {:<8} length {:.6}", tag.as_str(), m.boundary_length(tag));
    }
    let hash = m.hash_hex();
    let space = DofMap::new(Arc::new(m));
    println!("velocity dofs {}", space.num_velocity_dofs());
    println!("pressure dofs {}", space.num_pressure_dofs());
    println!("hash          {hash}");
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), String> {
    match cli.cmd {
        Cmd::Run { config, dry_run } => {
            let spec = parse_config(&config).map_err(|e| format!("{}: {e}", config.display()))?;
            run_all(&spec, dry_run)
        }
        Cmd::Sweep { config, vary, dry_run } => {
            let mut spec = parse_config(&config).map_err(|e| format!("{}: {e}", config.display()))?;
            for v in &vary {
                let (key, values) = v.split_once('=').ok_or_else(|| format!("--vary {v:?}: expected key=v1,v2,..."))?;
                let values: Vec<&str> = values.split(',').collect();
                spec.add_sweep(key.trim(), &values).map_err(|e| format!("--vary {v:?}: {e}"))?;
            }
            run_all(&spec, dry_run)
        }
        Cmd::Mesh { cmd: MeshCmd::Gen { kind, n, h, far_h, wake_end, refine, output } } => {
            let m = mesh_gen(&kind, n, h, far_h, wake_end, refine)?;
            save_mesh(&m, &output).map_err(|e| e.to_string())?;
            println!("wrote {} ({} cells, hash {})", output.display(), m.num_cells(), m.hash_hex());
            Ok(())
        }
        Cmd::Mesh { cmd: MeshCmd::Info { path } } => mesh_info(&path),
        Cmd::Reference { cmd: ReferenceCmd::Gen { config } } => {
            let spec = parse_config(&config).map_err(|e| format!("{}: {e}", config.display()))?;
            if !matches!(spec.scheme.kind, SchemeKind::CoupledBE | SchemeKind::CoupledBDF2) {
                return Err(format!("reference runs use coupled_be or coupled_bdf2, not {}", spec.scheme.kind));
            }
            if spec.output.archive.is_none() {
                return Err("reference runs need `archive` in [output]".into());
            }
            if spec.nudge.is_some_and(|n| n.mu > 0.0) {
                return Err("reference runs are not nudged".into());
            }
            run_all(&spec, false)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
