//! Plain-text run configuration: `key = value` lines under `[section]` headers.
//!
//! Sections are `[mesh] [scheme] [cda] [truth] [output]` and an optional
//! `[sweep]` whose keys are dotted (`cda.mu = 0, 10, 1e3`). Numbers may be
//! written as fractions (`H = 1/32`).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::cda::InterpolantMode;
use crate::schemes::{SchemeConfig, SchemeKind, SolverBackend, SolverSettings};
use crate::truth::TimePolicy;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown section [{name}]")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: unknown key `{key}` in [{section}]")]
    UnknownKey { line: usize, section: String, key: String },
    #[error("line {second}: duplicate key `{key}` (first set on line {first})")]
    Duplicate { key: String, first: usize, second: usize },
    #[error("missing required key `{key}` in [{section}]")]
    Missing { section: String, key: String },
    #[error("line {line}: `{key}`: {msg}")]
    Type { line: usize, key: String, msg: String },
    #[error("line {line}: {msg}")]
    Invalid { line: usize, msg: String },
    #[error("{0}")]
    Io(String),
}

const SECTIONS: [(&str, &[&str]); 5] = [
    ("mesh", &["kind", "n", "h", "near_h", "far_h", "wake_end", "path"]),
    ("scheme", &["scheme", "problem", "nu", "dt", "end_time", "eps", "initial", "solver", "tol", "max_iter"]),
    ("cda", &["mu", "N", "H", "mode"]),
    ("truth", &["source", "path", "policy"]),
    ("output", &["dir", "metrics", "every", "archive", "archive_stride"]),
];

fn known(section: &str, key: &str) -> bool {
    SECTIONS.iter().any(|(s, keys)| *s == section && keys.contains(&key))
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    section: String,
    key: String,
    value: String,
    line: usize,
}

/// Syntactically valid configuration text before interpretation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawConfig {
    entries: Vec<Entry>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut section: Option<String> = None;
        let mut entries: Vec<Entry> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or(ConfigError::Syntax { line, msg: "unterminated section header".into() })?.trim();
                if name != "sweep" && !SECTIONS.iter().any(|(s, _)| *s == name) {
                    return Err(ConfigError::UnknownSection { line, name: name.into() });
                }
                if entries.iter().any(|e| e.section == name) {
                    return Err(ConfigError::Syntax { line, msg: format!("section [{name}] repeated") });
                }
                section = Some(name.into());
                continue;
            }
            let (k, v) = body.split_once('=').ok_or(ConfigError::Syntax { line, msg: format!("expected `key = value`, found {body:?}") })?;
            let (key, value) = (k.trim(), v.trim());
            let sec = section.clone().ok_or(ConfigError::Syntax { line, msg: "key outside any section".into() })?;
            if key.is_empty() {
                return Err(ConfigError::Syntax { line, msg: "empty key".into() });
            }
            if value.is_empty() {
                return Err(ConfigError::Type { line, key: key.into(), msg: "empty value".into() });
            }
            if sec == "sweep" {
                let ok = key.split_once('.').is_some_and(|(s, k)| known(s, k));
                if !ok {
                    return Err(ConfigError::UnknownKey { line, section: sec, key: key.into() });
                }
            } else if !known(&sec, key) {
                return Err(ConfigError::UnknownKey { line, section: sec, key: key.into() });
            }
            if let Some(prev) = entries.iter().find(|e| e.section == sec && e.key == key) {
                return Err(ConfigError::Duplicate { key: key.into(), first: prev.line, second: line });
            }
            entries.push(Entry { section: sec, key: key.into(), value: value.into(), line });
        }
        Ok(Self { entries })
    }

    fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.section == section && e.key == key)
    }

    fn has_section(&self, section: &str) -> bool {
        self.entries.iter().any(|e| e.section == section)
    }

    /// Sets `section.key` (or a bare key that names exactly one known key) to `value`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let (section, key) = resolve_key(key)?;
        let value = value.trim().to_string();
        match self.entries.iter_mut().find(|e| e.section == section && e.key == key) {
            Some(e) => e.value = value,
            None => self.entries.push(Entry { section, key, value, line: 0 }),
        }
        Ok(())
    }

    fn without_sweep(&self) -> Self {
        Self { entries: self.entries.iter().filter(|e| e.section != "sweep").cloned().collect() }
    }
}

/// `section.key`, or a bare key when exactly one section knows it.
pub fn resolve_key(key: &str) -> Result<(String, String), ConfigError> {
    let bad = || ConfigError::UnknownKey { line: 0, section: "?".into(), key: key.into() };
    if let Some((s, k)) = key.split_once('.') {
        return if known(s, k) { Ok((s.into(), k.into())) } else { Err(bad()) };
    }
    let hits: Vec<&str> = SECTIONS.iter().filter(|(_, keys)| keys.contains(&key)).map(|(s, _)| *s).collect();
    match hits.as_slice() {
        [s] => Ok(((*s).into(), key.into())),
        _ => Err(bad()),
    }
}

/// Parses a real number or a fraction `a/b`.
pub fn parse_real(s: &str) -> Option<f64> {
    let v = match s.split_once('/') {
        Some((a, b)) => a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?,
        None => s.parse::<f64>().ok()?,
    };
    v.is_finite().then_some(v)
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    UnitSquare { n: usize },
    Channel { near_h: f64, far_h: f64, wake_end: f64 },
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    /// Closed-form solution on the unit square.
    Manufactured,
    /// Channel with a square block and parabolic inflow.
    Channel,
}

impl ProblemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKind::Manufactured => "manufactured",
            ProblemKind::Channel => "channel",
        }
    }

    fn default_nu(self) -> f64 {
        match self {
            ProblemKind::Manufactured => 1.0,
            ProblemKind::Channel => 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialCondition {
    Zero,
    /// Truth at t = 0.
    Truth,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TruthSpec {
    None,
    Analytic,
    Archive { path: PathBuf, policy: TimePolicy },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NudgeSpec {
    pub mu: f64,
    /// Coarse cells per side.
    pub n: usize,
    pub mode: InterpolantMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    L2Error,
    H1Error,
    VelocityNorm,
    Drag,
    Lift,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::L2Error, Metric::H1Error, Metric::VelocityNorm, Metric::Drag, Metric::Lift];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::L2Error => "l2_error",
            Metric::H1Error => "h1_error",
            Metric::VelocityNorm => "velocity_norm",
            Metric::Drag => "drag",
            Metric::Lift => "lift",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub metrics: Vec<Metric>,
    /// Record every this many steps.
    pub every: usize,
    /// Snapshot archive directory and stride.
    pub archive: Option<(PathBuf, usize)>,
}

/// A validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub mesh: MeshSource,
    pub problem: ProblemKind,
    pub scheme: SchemeConfig,
    pub initial: InitialCondition,
    pub nudge: Option<NudgeSpec>,
    pub truth: TruthSpec,
    pub output: OutputSpec,
    /// `(section.key, values)` pairs from `[sweep]`.
    pub sweep: Vec<(String, Vec<String>)>,
}

struct Reader<'a> {
    raw: &'a RawConfig,
}

impl Reader<'_> {
    fn opt(&self, s: &str, k: &str) -> Option<&Entry> {
        self.raw.get(s, k)
    }

    fn req(&self, s: &str, k: &str) -> Result<&Entry, ConfigError> {
        self.opt(s, k).ok_or(ConfigError::Missing { section: s.into(), key: k.into() })
    }

    fn real(e: &Entry) -> Result<f64, ConfigError> {
        parse_real(&e.value).ok_or(ConfigError::Type { line: e.line, key: e.key.clone(), msg: format!("expected a number, found {:?}", e.value) })
    }

    fn count(e: &Entry) -> Result<usize, ConfigError> {
        e.value.parse::<usize>().map_err(|_| ConfigError::Type { line: e.line, key: e.key.clone(), msg: format!("expected a non-negative integer, found {:?}", e.value) })
    }

    fn opt_real(&self, s: &str, k: &str) -> Result<Option<(f64, usize)>, ConfigError> {
        self.opt(s, k).map(|e| Ok((Self::real(e)?, e.line))).transpose()
    }

    fn word<T>(e: &Entry, parse: impl Fn(&str) -> Option<T>, choices: &str) -> Result<T, ConfigError> {
        parse(&e.value).ok_or(ConfigError::Type { line: e.line, key: e.key.clone(), msg: format!("expected one of {choices}, found {:?}", e.value) })
    }
}

fn positive(v: f64, line: usize, what: &str) -> Result<f64, ConfigError> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::Invalid { line, msg: format!("{what} must be positive, got {v}") })
    }
}

impl RunSpec {
    /// Interprets a parsed configuration and checks cross-key consistency.
    /// Referenced files are not touched; see [`RunSpec::check_files`].
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let r = Reader { raw };
        let kind_e = r.req("mesh", "kind")?;
        let mesh = match kind_e.value.as_str() {
            "unit_square" => {
                let n = Reader::count(r.req("mesh", "n")?)?;
                if n == 0 {
                    return Err(ConfigError::Invalid { line: r.req("mesh", "n")?.line, msg: "n must be at least 1".into() });
                }
                MeshSource::UnitSquare { n }
            }
            "channel" => {
                let h = r.opt_real("mesh", "h")?;
                let near = r.opt_real("mesh", "near_h")?;
                let (near_h, line) = match (h, near) {
                    (Some(_), Some((_, l))) => return Err(ConfigError::Invalid { line: l, msg: "give either h or near_h, not both".into() }),
                    (Some(v), None) | (None, Some(v)) => v,
                    (None, None) => return Err(ConfigError::Missing { section: "mesh".into(), key: "h".into() }),
                };
                let far_h = r.opt_real("mesh", "far_h")?.map_or(near_h, |v| v.0);
                let wake_end = r.opt_real("mesh", "wake_end")?.map_or(crate::mesh::CHANNEL_LENGTH, |v| v.0);
                let b = crate::mesh::ChannelMeshBuilder { near_h, far_h, wake_end };
                b.check().map_err(|e| ConfigError::Invalid { line, msg: e.to_string() })?;
                MeshSource::Channel { near_h, far_h, wake_end }
            }
            "file" => MeshSource::File(PathBuf::from(&r.req("mesh", "path")?.value)),
            _ => return Err(ConfigError::Type { line: kind_e.line, key: "kind".into(), msg: format!("expected unit_square, channel or file, found {:?}", kind_e.value) }),
        };

        let problem = match r.opt("scheme", "problem") {
            Some(e) => Reader::word(
                e,
                |s| match s {
                    "manufactured" => Some(ProblemKind::Manufactured),
                    "channel" => Some(ProblemKind::Channel),
                    _ => None,
                },
                "manufactured, channel",
            )?,
            None => match mesh {
                MeshSource::Channel { .. } => ProblemKind::Channel,
                _ => ProblemKind::Manufactured,
            },
        };
        let kind = Reader::word(r.req("scheme", "scheme")?, SchemeKind::parse, "coupled_be, coupled_bdf2, proj_be, proj_bdf2, penalty_be, penalty_bdf2")?;
        let dt_e = r.req("scheme", "dt")?;
        let dt = positive(Reader::real(dt_e)?, dt_e.line, "dt")?;
        let end_e = r.req("scheme", "end_time")?;
        let end_time = positive(Reader::real(end_e)?, end_e.line, "end_time")?;
        let nu = match r.opt_real("scheme", "nu")? {
            Some((v, l)) => positive(v, l, "nu")?,
            None => problem.default_nu(),
        };
        let eps = match r.opt_real("scheme", "eps")? {
            Some((v, l)) => positive(v, l, "eps")?,
            None => 1.0,
        };
        let mut solver = SolverSettings::default();
        if let Some(e) = r.opt("scheme", "solver") {
            solver.backend = Reader::word(e, SolverBackend::parse, "direct, iterative")?;
        }
        if let Some((v, l)) = r.opt_real("scheme", "tol")? {
            if !(v > 0.0 && v < 1.0) {
                return Err(ConfigError::Invalid { line: l, msg: format!("tol must lie in (0, 1), got {v}") });
            }
            solver.tol = v;
        }
        if let Some(e) = r.opt("scheme", "max_iter") {
            solver.max_iter = Reader::count(e)?;
            if solver.max_iter == 0 {
                return Err(ConfigError::Invalid { line: e.line, msg: "max_iter must be positive".into() });
            }
        }
        let scheme = SchemeConfig { nu, dt, end_time, eps, kind, solver };
        scheme.num_steps().map_err(|e| ConfigError::Invalid { line: end_e.line, msg: e.to_string() })?;
        let initial = match r.opt("scheme", "initial") {
            Some(e) => Reader::word(
                e,
                |s| match s {
                    "zero" => Some(InitialCondition::Zero),
                    "truth" => Some(InitialCondition::Truth),
                    _ => None,
                },
                "zero, truth",
            )?,
            None => InitialCondition::Zero,
        };

        let nudge = if raw.has_section("cda") {
            let mu_e = r.req("cda", "mu")?;
            let mu = Reader::real(mu_e)?;
            if mu < 0.0 {
                return Err(ConfigError::Invalid { line: mu_e.line, msg: format!("mu must be non-negative, got {mu}") });
            }
            let n = match (r.opt("cda", "N"), r.opt("cda", "H")) {
                (Some(_), Some(h)) => return Err(ConfigError::Invalid { line: h.line, msg: "give either N or H, not both".into() }),
                (Some(e), None) => Reader::count(e)?,
                (None, Some(e)) => {
                    let h = positive(Reader::real(e)?, e.line, "H")?;
                    let n = (1.0 / h).round();
                    if !(n >= 1.0 && n < 1e6) {
                        return Err(ConfigError::Invalid { line: e.line, msg: format!("H = {h} gives no usable coarse grid") });
                    }
                    n as usize
                }
                (None, None) => return Err(ConfigError::Missing { section: "cda".into(), key: "N".into() }),
            };
            if n == 0 {
                return Err(ConfigError::Invalid { line: r.req("cda", "N")?.line, msg: "N must be at least 1".into() });
            }
            let mode = match r.opt("cda", "mode") {
                Some(e) => Reader::word(e, InterpolantMode::parse, "average, nodal")?,
                None => InterpolantMode::default(),
            };
            Some(NudgeSpec { mu, n, mode })
        } else {
            None
        };

        let truth = match r.opt("truth", "source") {
            None => TruthSpec::None,
            Some(e) => match e.value.as_str() {
                "none" => TruthSpec::None,
                "analytic" => TruthSpec::Analytic,
                "archive" => {
                    let policy = match r.opt("truth", "policy") {
                        Some(p) => Reader::word(p, TimePolicy::parse, "strict, linear")?,
                        None => TimePolicy::Strict,
                    };
                    TruthSpec::Archive { path: PathBuf::from(&r.req("truth", "path")?.value), policy }
                }
                _ => return Err(ConfigError::Type { line: e.line, key: "source".into(), msg: format!("expected none, analytic or archive, found {:?}", e.value) }),
            },
        };

        let dir = PathBuf::from(&r.req("output", "dir")?.value);
        let metrics = match r.opt("output", "metrics") {
            Some(e) => e
                .value
                .split(',')
                .map(|m| Reader::word(&Entry { value: m.trim().into(), ..e.clone() }, Metric::parse, "l2_error, h1_error, velocity_norm, drag, lift"))
                .collect::<Result<Vec<_>, _>>()?,
            None => vec![Metric::VelocityNorm],
        };
        let every = match r.opt("output", "every") {
            Some(e) => match Reader::count(e)? {
                0 => return Err(ConfigError::Invalid { line: e.line, msg: "every must be positive".into() }),
                v => v,
            },
            None => 1,
        };
        let archive = match r.opt("output", "archive") {
            Some(e) => {
                let stride = match r.opt("output", "archive_stride") {
                    Some(s) => match Reader::count(s)? {
                        0 => return Err(ConfigError::Invalid { line: s.line, msg: "archive_stride must be positive".into() }),
                        v => v,
                    },
                    None => 1,
                };
                Some((PathBuf::from(&e.value), stride))
            }
            None => None,
        };
        let output = OutputSpec { dir, metrics, every, archive };

        let mut sweep = Vec::new();
        for e in raw.entries.iter().filter(|e| e.section == "sweep") {
            let vals: Vec<String> = e.value.split(',').map(|v| v.trim().to_string()).collect();
            if vals.iter().any(String::is_empty) {
                return Err(ConfigError::Type { line: e.line, key: e.key.clone(), msg: "empty entry in value list".into() });
            }
            for v in &vals {
                let mut probe = raw.without_sweep();
                probe.set(&e.key, v)?;
                RunSpec::from_raw(&probe).map_err(|err| ConfigError::Invalid { line: e.line, msg: format!("{} = {v}: {err}", e.key) })?;
            }
            sweep.push((e.key.clone(), vals));
        }

        let spec = RunSpec { mesh, problem, scheme, initial, nudge, truth, output, sweep };
        spec.check_consistency(raw)?;
        Ok(spec)
    }

    fn check_consistency(&self, raw: &RawConfig) -> Result<(), ConfigError> {
        let line_of = |s: &str, k: &str| raw.get(s, k).map_or(0, |e| e.line);
        let no_truth = self.truth == TruthSpec::None;
        if no_truth && self.nudge.is_some_and(|n| n.mu > 0.0) {
            return Err(ConfigError::Invalid { line: line_of("cda", "mu"), msg: "nudging needs a truth source".into() });
        }
        if no_truth && self.initial == InitialCondition::Truth {
            return Err(ConfigError::Invalid { line: line_of("scheme", "initial"), msg: "initial = truth needs a truth source".into() });
        }
        if no_truth && self.output.metrics.iter().any(|m| matches!(m, Metric::L2Error | Metric::H1Error)) {
            return Err(ConfigError::Invalid { line: line_of("output", "metrics"), msg: "error metrics need a truth source".into() });
        }
        if self.truth == TruthSpec::Analytic && self.problem != ProblemKind::Manufactured {
            return Err(ConfigError::Invalid { line: line_of("truth", "source"), msg: "the analytic truth only exists for the manufactured problem".into() });
        }
        if self.problem == ProblemKind::Channel && matches!(self.mesh, MeshSource::UnitSquare { .. }) {
            return Err(ConfigError::Invalid { line: line_of("scheme", "problem"), msg: "the channel problem needs a channel mesh".into() });
        }
        if self.problem == ProblemKind::Manufactured && self.output.metrics.iter().any(|m| matches!(m, Metric::Drag | Metric::Lift)) {
            return Err(ConfigError::Invalid { line: line_of("output", "metrics"), msg: "drag and lift need the channel problem".into() });
        }
        Ok(())
    }

    /// Every file the run reads must exist.
    pub fn check_files(&self) -> Result<(), ConfigError> {
        let must = |p: &Path, what: &str| {
            if p.exists() {
                Ok(())
            } else {
                Err(ConfigError::Io(format!("{what} {} does not exist", p.display())))
            }
        };
        if let MeshSource::File(p) = &self.mesh {
            must(p, "mesh file")?;
        }
        if let TruthSpec::Archive { path, .. } = &self.truth {
            must(&path.join("meta"), "truth archive")?;
        }
        Ok(())
    }

    /// The run variants named by `[sweep]`, each with a label like `cda.mu=10`.
    pub fn variants(&self) -> Result<Vec<(String, RunSpec)>, ConfigError> {
        let base = RawConfig::parse(&self.to_config_text())?.without_sweep();
        let mut out = vec![(String::new(), base)];
        for (key, vals) in &self.sweep {
            let mut next = Vec::new();
            for (label, raw) in &out {
                for v in vals {
                    let mut r = raw.clone();
                    r.set(key, v)?;
                    let l = if label.is_empty() { format!("{key}={v}") } else { format!("{label},{key}={v}") };
                    next.push((l, r));
                }
            }
            out = next;
        }
        out.into_iter().map(|(l, r)| Ok((l, RunSpec::from_raw(&r)?))).collect()
    }

    /// Adds a sweep axis (replacing one on the same key) and checks every value.
    pub fn add_sweep(&mut self, key: &str, values: &[&str]) -> Result<(), ConfigError> {
        let (s, k) = resolve_key(key)?;
        let key = format!("{s}.{k}");
        let values: Vec<String> = values.iter().map(|v| v.trim().to_string()).collect();
        if values.is_empty() || values.iter().any(|v| v.is_empty() || v.contains(',')) {
            return Err(ConfigError::Type { line: 0, key, msg: "expected a comma-separated list of values".into() });
        }
        self.sweep.retain(|(k2, _)| *k2 != key);
        self.sweep.push((key, values));
        *self = parse_config_str(&self.to_config_text())?;
        Ok(())
    }

    /// Canonical configuration text; parsing it gives back an equal spec.
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        let f = |v: f64| format!("{v:?}");
        s.push_str("[mesh]\n");
        match &self.mesh {
            MeshSource::UnitSquare { n } => {
                let _ = writeln!(s, "kind = unit_square\nn = {n}");
            }
            MeshSource::Channel { near_h, far_h, wake_end } => {
                let _ = writeln!(s, "kind = channel\nnear_h = {}\nfar_h = {}\nwake_end = {}", f(*near_h), f(*far_h), f(*wake_end));
            }
            MeshSource::File(p) => {
                let _ = writeln!(s, "kind = file\npath = {}", p.display());
            }
        }
        let c = &self.scheme;
        let _ = writeln!(
            s,
            "\n[scheme]\nscheme = {}\nproblem = {}\nnu = {}\ndt = {}\nend_time = {}\neps = {}\ninitial = {}\nsolver = {}\ntol = {}\nmax_iter = {}",
            c.kind,
            self.problem.as_str(),
            f(c.nu),
            f(c.dt),
            f(c.end_time),
            f(c.eps),
            match self.initial {
                InitialCondition::Zero => "zero",
                InitialCondition::Truth => "truth",
            },
            c.solver.backend.as_str(),
            f(c.solver.tol),
            c.solver.max_iter
        );
        if let Some(n) = &self.nudge {
            let _ = writeln!(s, "\n[cda]\nmu = {}\nN = {}\nmode = {}", f(n.mu), n.n, n.mode.as_str());
        }
        s.push_str("\n[truth]\n");
        match &self.truth {
            TruthSpec::None => s.push_str("source = none\n"),
            TruthSpec::Analytic => s.push_str("source = analytic\n"),
            TruthSpec::Archive { path, policy } => {
                let _ = writeln!(s, "source = archive\npath = {}\npolicy = {}", path.display(), policy.as_str());
            }
        }
        let o = &self.output;
        let metrics: Vec<&str> = o.metrics.iter().map(|m| m.as_str()).collect();
        let _ = writeln!(s, "\n[output]\ndir = {}\nmetrics = {}\nevery = {}", o.dir.display(), metrics.join(", "), o.every);
        if let Some((p, stride)) = &o.archive {
            let _ = writeln!(s, "archive = {}\narchive_stride = {stride}", p.display());
        }
        if !self.sweep.is_empty() {
            s.push_str("\n[sweep]\n");
            for (k, v) in &self.sweep {
                let _ = writeln!(s, "{k} = {}", v.join(", "));
            }
        }
        s
    }
}

/// Parses and validates configuration text (no file checks).
pub fn parse_config_str(text: &str) -> Result<RunSpec, ConfigError> {
    RunSpec::from_raw(&RawConfig::parse(text)?)
}

/// Reads, parses and validates a configuration file, including the files it references.
pub fn parse_config(path: impl AsRef<Path>) -> Result<RunSpec, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
    let spec = parse_config_str(&text)?;
    spec.check_files()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXP1: &str = "\
# projection with nudging
[mesh]
kind = unit_square
n = 16

[scheme]
scheme = proj_be
dt = 0.05
end_time = 2

[cda]
mu = 1e5
H = 1/32

[truth]
source = analytic

[output]
dir = out/exp1
metrics = l2_error, h1_error
";

    #[test]
    fn exp1_validates() {
        let s = parse_config_str(EXP1).unwrap();
        assert_eq!(s.scheme.kind, SchemeKind::ProjBE);
        assert_eq!(s.scheme.nu, 1.0);
        assert_eq!(s.nudge.unwrap().n, 32);
        assert_eq!(s.nudge.unwrap().mu, 1e5);
        assert_eq!(s.output.metrics, vec![Metric::L2Error, Metric::H1Error]);
    }

    #[test]
    fn echo_round_trips() {
        let s = parse_config_str(EXP1).unwrap();
        assert_eq!(parse_config_str(&s.to_config_text()).unwrap(), s);
        let ch = "[mesh]\nkind = channel\nnear_h = 0.02\nfar_h = 0.05\nwake_end = 1\n[scheme]\nscheme = coupled_bdf2\ndt = 0.002\nend_time = 0.01\n[output]\ndir = o\nmetrics = drag, lift\narchive = ref\n[sweep]\nscheme.dt = 0.001, 0.002\n";
        let s = parse_config_str(ch).unwrap();
        assert_eq!(s.problem, ProblemKind::Channel);
        assert_eq!(s.scheme.nu, 1e-3);
        assert_eq!(parse_config_str(&s.to_config_text()).unwrap(), s);
    }

    #[test]
    fn errors_carry_lines() {
        let neg = EXP1.replace("mu = 1e5", "mu = -1");
        assert!(matches!(parse_config_str(&neg), Err(ConfigError::Invalid { line: 12, .. })));
        let dup = EXP1.replace("n = 16", "n = 16\nn = 8");
        let e = parse_config_str(&dup).unwrap_err();
        assert_eq!(e, ConfigError::Duplicate { key: "n".into(), first: 4, second: 5 });
        assert!(e.to_string().contains("line 5") && e.to_string().contains("line 4"));
        let unk = EXP1.replace("n = 16", "m = 16");
        assert!(matches!(parse_config_str(&unk), Err(ConfigError::UnknownKey { line: 4, .. })));
        let typ = EXP1.replace("dt = 0.05", "dt = fast");
        assert!(matches!(parse_config_str(&typ), Err(ConfigError::Type { line: 8, .. })));
        let miss = EXP1.replace("dt = 0.05\n", "");
        assert!(matches!(parse_config_str(&miss), Err(ConfigError::Missing { .. })));
        assert!(matches!(parse_config_str("[nope]\n"), Err(ConfigError::UnknownSection { line: 1, .. })));
        assert!(matches!(parse_config_str("x = 1\n"), Err(ConfigError::Syntax { line: 1, .. })));
    }

    #[test]
    fn consistency_rules() {
        let no_truth = EXP1.replace("source = analytic", "source = none");
        assert!(parse_config_str(&no_truth).is_err());
        let mu0 = no_truth.replace("mu = 1e5", "mu = 0").replace("metrics = l2_error, h1_error", "metrics = velocity_norm");
        assert!(parse_config_str(&mu0).is_ok());
        let odd = EXP1.replace("end_time = 2", "end_time = 0.07");
        assert!(parse_config_str(&odd).is_err());
    }

    #[test]
    fn sweep_variants() {
        let text = format!("{EXP1}\n[sweep]\ncda.mu = 0, 10, 1e3, 1e5\n");
        let s = parse_config_str(&text).unwrap();
        let v = s.variants().unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(v[1].0, "cda.mu=10");
        assert_eq!(v[1].1.nudge.unwrap().mu, 10.0);
        assert!(v.iter().all(|(_, r)| r.sweep.is_empty()));
        assert!(parse_config_str(&format!("{EXP1}\n[sweep]\ncda.mu = 0, -1\n")).is_err());
        assert!(parse_config_str(&format!("{EXP1}\n[sweep]\nmu = 0\n")).is_err());
        let mut s = parse_config_str(EXP1).unwrap();
        s.add_sweep("dt", &["0.05", "0.025"]).unwrap();
        assert_eq!(s.variants().unwrap().len(), 2);
        assert!(s.add_sweep("mu", &["-3"]).is_err());
    }

    #[test]
    fn fractions_and_keys() {
        assert_eq!(parse_real("1/32"), Some(1.0 / 32.0));
        assert_eq!(parse_real("1/0"), None);
        assert_eq!(parse_real("2.5e-3"), Some(2.5e-3));
        assert_eq!(resolve_key("mu").unwrap(), ("cda".into(), "mu".into()));
        assert!(resolve_key("path").is_err());
        assert_eq!(resolve_key("truth.path").unwrap(), ("truth".into(), "path".into()));
    }
}
