use super::{signed_area, Mesh, Point};

/// Bucket grid over the bounding box for point-in-cell queries.
#[derive(Debug, Clone)]
pub struct PointLocator {
    x0: f64,
    y0: f64,
    dx: f64,
    dy: f64,
    nx: usize,
    ny: usize,
    start: Vec<usize>,
    items: Vec<usize>,
}

/// Barycentric coordinates of `p` in the triangle `t`.
pub fn barycentric(t: &[Point; 3], p: Point) -> [f64; 3] {
    let area = signed_area(t[0], t[1], t[2]);
    let l0 = signed_area(p, t[1], t[2]) / area;
    let l1 = signed_area(t[0], p, t[2]) / area;
    [l0, l1, 1.0 - l0 - l1]
}

impl PointLocator {
    pub fn new(mesh: &Mesh) -> Self {
        let (x0, y0, x1, y1) = mesh.bounding_box();
        let nc = mesh.num_cells().max(1);
        let (w, h) = ((x1 - x0).max(1e-300), (y1 - y0).max(1e-300));
        // about one cell per bucket
        let side = (w * h / nc as f64).sqrt();
        let nx = ((w / side).ceil() as usize).clamp(1, 4096);
        let ny = ((h / side).ceil() as usize).clamp(1, 4096);
        let (dx, dy) = (w / nx as f64, h / ny as f64);
        let bucket = |x: f64, nb: usize, o: f64, d: f64| (((x - o) / d).floor().max(0.0) as usize).min(nb - 1);
        let mut lists = vec![Vec::new(); nx * ny];
        for c in 0..mesh.num_cells() {
            let pts = mesh.cell_points(c);
            let (mut lx, mut ly, mut hx, mut hy) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
            for p in pts {
                lx = lx.min(p.x);
                ly = ly.min(p.y);
                hx = hx.max(p.x);
                hy = hy.max(p.y);
            }
            let (pad_x, pad_y) = (1e-12 * w, 1e-12 * h);
            for j in bucket(ly - pad_y, ny, y0, dy)..=bucket(hy + pad_y, ny, y0, dy) {
                for i in bucket(lx - pad_x, nx, x0, dx)..=bucket(hx + pad_x, nx, x0, dx) {
                    lists[j * nx + i].push(c);
                }
            }
        }
        let mut start = Vec::with_capacity(nx * ny + 1);
        let mut items = Vec::new();
        start.push(0);
        for l in lists {
            items.extend(l);
            start.push(items.len());
        }
        Self { x0, y0, dx, dy, nx, ny, start, items }
    }

    /// The cell containing `p` (boundary points included, within a small
    /// tolerance) and the barycentric coordinates of `p` in it.
    pub fn locate(&self, mesh: &Mesh, p: Point) -> Option<(usize, [f64; 3])> {
        let fx = (p.x - self.x0) / self.dx;
        let fy = (p.y - self.y0) / self.dy;
        let tol = 1e-10;
        if !(fx > -tol && fy > -tol && fx < self.nx as f64 + tol && fy < self.ny as f64 + tol) {
            return None;
        }
        let i = (fx.floor().max(0.0) as usize).min(self.nx - 1);
        let j = (fy.floor().max(0.0) as usize).min(self.ny - 1);
        let b = j * self.nx + i;
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &c in &self.items[self.start[b]..self.start[b + 1]] {
            let l = barycentric(&mesh.cell_points(c), p);
            let worst = l[0].min(l[1]).min(l[2]);
            if worst >= 0.0 {
                return Some((c, l));
            }
            if best.as_ref().map_or(true, |(_, _, w)| worst > *w) {
                best = Some((c, l, worst));
            }
        }
        best.filter(|(_, _, w)| *w > -tol).map(|(c, l, _)| (c, l))
    }
}
