use super::{BoundaryTag, Mesh, MeshError, Point};

/// A uniform `n × n` partition of a rectangle, used as the measurement grid.
///
/// `mesh` splits every rectangle into two triangles, so its maximum cell
/// diameter is the rectangle diagonal, which is also `spacing`.
#[derive(Debug, Clone)]
pub struct CoarseGrid {
    pub n: usize,
    pub origin: Point,
    pub dx: f64,
    pub dy: f64,
    pub spacing: f64,
    pub mesh: Mesh,
}

impl CoarseGrid {
    /// `n × n` cells over `[x0, x1] × [y0, y1]`.
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64, n: usize) -> Result<Self, MeshError> {
        if n == 0 {
            return Err(MeshError::InvalidParameter("coarse grid needs n ≥ 1".into()));
        }
        if !(x1 > x0 && y1 > y0) || ![x0, y0, x1, y1].iter().all(|v| v.is_finite()) {
            return Err(MeshError::InvalidParameter(format!("degenerate coarse box [{x0}, {x1}] × [{y0}, {y1}]")));
        }
        let dx = (x1 - x0) / n as f64;
        let dy = (y1 - y0) / n as f64;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                let x = if i == n { x1 } else { x0 + i as f64 * dx };
                let y = if j == n { y1 } else { y0 + j as f64 * dy };
                vertices.push(Point::new(x, y));
            }
        }
        let idx = |i: usize, j: usize| j * (n + 1) + i;
        let mut cells = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                cells.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
                cells.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            }
        }
        let mesh = Mesh::with_boundary_tags(vertices, cells, |_, _| BoundaryTag::Wall)?;
        let spacing = mesh.max_diameter();
        Ok(Self { n, origin: Point::new(x0, y0), dx, dy, spacing, mesh })
    }

    /// `n × n` cells over the bounding box of `fine`.
    pub fn covering(fine: &Mesh, n: usize) -> Result<Self, MeshError> {
        let (x0, y0, x1, y1) = fine.bounding_box();
        Self::new(x0, y0, x1, y1, n)
    }

    pub fn num_cells(&self) -> usize {
        self.n * self.n
    }

    /// `(xmin, ymin, xmax, ymax)` of cell `k = j n + i`.
    pub fn rect(&self, k: usize) -> (f64, f64, f64, f64) {
        let (i, j) = (k % self.n, k / self.n);
        let v = self.mesh.vertices();
        let lo = v[j * (self.n + 1) + i];
        let hi = v[(j + 1) * (self.n + 1) + i + 1];
        (lo.x, lo.y, hi.x, hi.y)
    }
}
