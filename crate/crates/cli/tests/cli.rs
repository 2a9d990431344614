use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nudge(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nudge-ns")).args(args).current_dir(cwd).output().expect("spawn nudge-ns")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

const TINY: &str = "\
[mesh]
kind = unit_square
n = 4

[scheme]
scheme = proj_be
problem = manufactured
dt = 0.1
end_time = 0.3

[cda]
mu = 10
H = 1/2

[truth]
source = analytic

[output]
dir = out
metrics = l2_error, velocity_norm
";

#[test]
fn presets_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    for e in fs::read_dir(root.join("presets")).unwrap() {
        let p = e.unwrap().path();
        // archive-backed presets need the reference run first
        if fs::read_to_string(&p).unwrap().contains("source = archive") {
            continue;
        }
        let o = nudge(&["run", p.to_str().unwrap(), "--dry-run"], &root);
        assert!(o.status.success(), "{}: {}", p.display(), text(&o.stderr));
        assert!(text(&o.stdout).contains("# mesh:"));
    }
}

#[test]
fn bad_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    fs::write(&cfg, TINY.replace("dt = 0.1", "dt = fast")).unwrap();
    let o = nudge(&["run", "bad.conf"], dir.path());
    assert!(!o.status.success());
    let err = text(&o.stderr);
    assert!(err.starts_with("error:") && err.contains("line 8"), "{err}");
}

#[test]
fn tiny_run_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.conf"), TINY).unwrap();
    let o = nudge(&["run", "tiny.conf"], dir.path());
    assert!(o.status.success(), "{}", text(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("out/results.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().contains("l2_error"));
    assert_eq!(lines.count(), 4, "{csv}");
    let manifest = fs::read_to_string(dir.path().join("out/manifest")).unwrap();
    assert!(manifest.contains("# mesh_hash ") && manifest.contains("proj_be"));
}

#[test]
fn sweep_vary_makes_one_dir_per_value() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.conf"), TINY).unwrap();
    let o = nudge(&["sweep", "tiny.conf", "--vary", "cda.mu=0,100"], dir.path());
    assert!(o.status.success(), "{}", text(&o.stderr));
    for label in ["cda.mu=0", "cda.mu=100"] {
        assert!(dir.path().join("out").join(label).join("results.csv").is_file(), "{label}");
    }
    let o = nudge(&["sweep", "tiny.conf", "--vary", "cda.bogus=1"], dir.path());
    assert!(!o.status.success());
}

#[test]
fn mesh_gen_and_info() {
    let dir = tempfile::tempdir().unwrap();
    let o = nudge(&["mesh", "gen", "--kind", "unit_square", "--n", "3", "-o", "sq.mesh"], dir.path());
    assert!(o.status.success(), "{}", text(&o.stderr));
    let o = nudge(&["mesh", "info", "sq.mesh"], dir.path());
    let out = text(&o.stdout);
    assert!(o.status.success());
    assert!(out.contains("cells         18"), "{out}");
    assert!(out.contains("area          1.000000"));
    let o = nudge(&["mesh", "gen", "--kind", "hexagon", "-o", "x.mesh"], dir.path());
    assert!(!o.status.success());
}

#[test]
fn reference_gen_rejects_projection() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.conf"), TINY).unwrap();
    let o = nudge(&["reference", "gen", "tiny.conf"], dir.path());
    assert!(!o.status.success());
    assert!(text(&o.stderr).contains("coupled"));
}
