//! Error norms, drag and lift, and CSV time series.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::fem::quadrature::gauss_legendre;
use crate::fem::{Field, FieldKind, QuadratureRule};
use crate::mesh::{BoundaryTag, Point, NO_CELL};
use crate::truth::{MeasurementSource, TruthError};

/// Density, reference length and peak inflow speed in the drag and lift scaling.
pub const RHO: f64 = 1.0;
pub const DRAG_LENGTH: f64 = 0.1;
pub const DRAG_SPEED: f64 = 1.5;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("mesh has no {0} boundary")]
    MissingTag(BoundaryTag),
    #[error("expected a {expected:?} field")]
    WrongKind { expected: FieldKind },
    #[error("fields live on different spaces")]
    SpaceMismatch,
    #[error("time {t} does not follow {last}")]
    NonIncreasingTime { t: f64, last: f64 },
    #[error("row has {found} values, series has {expected} columns")]
    RowLength { expected: usize, found: usize },
    #[error("csv line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Truth(#[from] TruthError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Named columns sharing a strictly increasing time axis.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeSeries {
    names: Vec<String>,
    times: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

impl TimeSeries {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        Self { names: names.into_iter().map(Into::into).collect(), times: Vec::new(), rows: Vec::new() }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, values: Vec<f64>) -> Result<(), MetricsError> {
        if values.len() != self.names.len() {
            return Err(MetricsError::RowLength { expected: self.names.len(), found: values.len() });
        }
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(MetricsError::NonIncreasingTime { t, last });
            }
        }
        self.times.push(t);
        self.rows.push(values);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.names.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn last(&self, name: &str) -> Option<f64> {
        self.column(name)?.last().copied()
    }

    /// CSV with a `time` column first and 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), MetricsError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(std::iter::once("time").chain(self.names.iter().map(String::as_str)))?;
        for (t, row) in self.times.iter().zip(&self.rows) {
            wr.write_record(std::iter::once(t).chain(row).map(|v| format!("{v:.16e}")))?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, MetricsError> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers()?.clone();
        if header.get(0) != Some("time") {
            return Err(MetricsError::Parse { line: 1, msg: "first column must be `time`".into() });
        }
        let mut ts = TimeSeries::new(header.iter().skip(1));
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let vals = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| MetricsError::Parse { line, msg: format!("{s:?}: {e}") }))
                .collect::<Result<Vec<_>, _>>()?;
            let (t, row) = vals.split_first().ok_or(MetricsError::Parse { line, msg: "empty record".into() })?;
            ts.push(*t, row.to_vec()).map_err(|e| MetricsError::Parse { line, msg: e.to_string() })?;
        }
        Ok(ts)
    }
}

pub fn emit_csv(series: &TimeSeries, path: impl AsRef<Path>) -> Result<(), MetricsError> {
    let f = std::fs::File::create(path)?;
    series.write_csv(std::io::BufWriter::new(f))
}

fn velocity(u: &Field) -> Result<(), MetricsError> {
    if u.kind() != FieldKind::Velocity {
        return Err(MetricsError::WrongKind { expected: FieldKind::Velocity });
    }
    Ok(())
}

fn cell_sum(u: &Field, mut f: impl FnMut(usize, &crate::fem::basis::CellGeometry, &[f64; 3]) -> f64) -> f64 {
    let q = QuadratureRule::of_degree(7);
    let mesh = u.space().mesh();
    let mut s = 0.0;
    for c in 0..mesh.num_cells() {
        let g = u.geometry(c);
        for (l, w) in q.points.iter().zip(&q.weights) {
            s += w * g.area * f(c, &g, l);
        }
    }
    s
}

/// `‖u_h − u‖_{L²}` against a closed-form velocity.
pub fn l2_error(u: &Field, exact: impl Fn(Point) -> [f64; 2]) -> Result<f64, MetricsError> {
    velocity(u)?;
    Ok(cell_sum(u, |c, g, l| {
        let a = u.velocity_at(c, l);
        let b = exact(g.point(l));
        (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
    })
    .sqrt())
}

/// `‖∇(u_h − u)‖_{L²}` against a closed-form gradient `g[i][j] = ∂u_i/∂x_j`.
pub fn h1_error(u: &Field, exact_grad: impl Fn(Point) -> [[f64; 2]; 2]) -> Result<f64, MetricsError> {
    velocity(u)?;
    Ok(cell_sum(u, |c, g, l| {
        let a = u.velocity_gradient_at(g, c, l);
        let b = exact_grad(g.point(l));
        (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| (a[i][j] - b[i][j]).powi(2)).sum()
    })
    .sqrt())
}

fn difference(a: &Field, b: &Field) -> Result<Field, MetricsError> {
    velocity(a)?;
    velocity(b)?;
    if !std::sync::Arc::ptr_eq(a.space(), b.space()) && a.space().mesh() != b.space().mesh() {
        return Err(MetricsError::SpaceMismatch);
    }
    let d = a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| x - y).collect();
    Ok(Field::from_coeffs(a.space().clone(), FieldKind::Velocity, d).expect("same length"))
}

/// `‖a − b‖_{L²}` for two discrete velocities on the same space.
pub fn l2_difference(a: &Field, b: &Field) -> Result<f64, MetricsError> {
    let d = difference(a, b)?;
    Ok(cell_sum(&d, |c, _, l| {
        let v = d.velocity_at(c, l);
        v[0] * v[0] + v[1] * v[1]
    })
    .sqrt())
}

pub fn h1_difference(a: &Field, b: &Field) -> Result<f64, MetricsError> {
    let d = difference(a, b)?;
    Ok(cell_sum(&d, |c, g, l| d.velocity_gradient_at(g, c, l).iter().flatten().map(|x| x * x).sum()).sqrt())
}

/// L2 velocity error against the truth at time `t`. Analytic truths are
/// integrated directly, stored ones compared as discrete fields.
pub fn l2_error_vs_truth(u: &Field, truth: &MeasurementSource, t: f64) -> Result<f64, MetricsError> {
    match truth {
        MeasurementSource::Analytic(a) => l2_error(u, |p| a.velocity(p, t)),
        _ => l2_difference(u, &crate::truth::sample_truth(truth, u.space(), t)?),
    }
}

pub fn h1_error_vs_truth(u: &Field, truth: &MeasurementSource, t: f64) -> Result<f64, MetricsError> {
    match truth {
        MeasurementSource::Analytic(a) => h1_error(u, |p| a.velocity_gradient(p, t)),
        _ => h1_difference(u, &crate::truth::sample_truth(truth, u.space(), t)?),
    }
}

/// `(Δt Σ aₙ²)^{1/2}`.
pub fn accumulated_h1_error(series: &[f64], dt: f64) -> f64 {
    (dt * series.iter().map(|a| a * a).sum::<f64>()).sqrt()
}

/// Drag and lift coefficients from line integrals over the block boundary.
///
/// `n` is the unit normal of the block pointing into the fluid and
/// `t = (n_y, −n_x)`. Velocity gradients come from the fluid cell adjacent
/// to each edge.
pub fn drag_lift(u: &Field, p: &Field, nu: f64) -> Result<(f64, f64), MetricsError> {
    velocity(u)?;
    if p.kind() != FieldKind::Pressure {
        return Err(MetricsError::WrongKind { expected: FieldKind::Pressure });
    }
    if !std::sync::Arc::ptr_eq(u.space(), p.space()) {
        return Err(MetricsError::SpaceMismatch);
    }
    let mesh = u.space().mesh();
    if !mesh.has_tag(BoundaryTag::Block) {
        return Err(MetricsError::MissingTag(BoundaryTag::Block));
    }
    let (gx, gw) = gauss_legendre(3);
    let (mut fd, mut fl) = (0.0, 0.0);
    for (e, verts) in mesh.edges().iter().enumerate() {
        if mesh.edge_tag(e) != Some(BoundaryTag::Block) {
            continue;
        }
        let [c, other] = mesh.edge_cells()[e];
        debug_assert_eq!(other, NO_CELL);
        let cell = mesh.cells()[c];
        let ia = cell.iter().position(|v| *v == verts[0]).expect("edge of cell");
        let ib = cell.iter().position(|v| *v == verts[1]).expect("edge of cell");
        let (a, b) = (mesh.vertices()[verts[0]], mesh.vertices()[verts[1]]);
        let len = a.dist(b);
        let mut n = [(b.y - a.y) / len, -(b.x - a.x) / len];
        let pts = mesh.cell_points(c);
        let cx = (pts[0].x + pts[1].x + pts[2].x) / 3.0 - 0.5 * (a.x + b.x);
        let cy = (pts[0].y + pts[1].y + pts[2].y) / 3.0 - 0.5 * (a.y + b.y);
        if n[0] * cx + n[1] * cy < 0.0 {
            n = [-n[0], -n[1]];
        }
        let t = [n[1], -n[0]];
        let geom = u.geometry(c);
        for (s, w) in gx.iter().zip(&gw) {
            let mut l = [0.0; 3];
            l[ia] = 1.0 - s;
            l[ib] = *s;
            let g = u.velocity_gradient_at(&geom, c, &l);
            let mut dut_dn = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    dut_dn += t[i] * g[i][j] * n[j];
                }
            }
            let pr = p.pressure_at(c, &l);
            fd += w * len * (RHO * nu * dut_dn * n[1] - pr * n[0]);
            fl += w * len * (RHO * nu * dut_dn * n[0] + pr * n[1]);
        }
    }
    let scale = 2.0 / (RHO * DRAG_LENGTH * DRAG_SPEED * DRAG_SPEED);
    Ok((scale * fd, -scale * fl))
}
