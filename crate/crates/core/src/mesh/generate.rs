use super::{BoundaryTag, Mesh, MeshError, Point};

pub const CHANNEL_LENGTH: f64 = 2.2;
pub const CHANNEL_HEIGHT: f64 = 0.41;
/// Lower-left and upper-right corners of the square obstacle.
pub const BLOCK_MIN: Point = Point::new(0.15, 0.15);
pub const BLOCK_MAX: Point = Point::new(0.25, 0.25);
const BLOCK_CENTER: Point = Point::new(0.2, 0.2);

/// Uniform right-triangle mesh of the unit square with `n` cells per side.
pub fn unit_square_mesh(n: usize) -> Mesh {
    let n = n.max(1);
    let h = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Point::new(i as f64 * h, j as f64 * h));
        }
    }
    // exact endpoints so the boundary sits at 0 and 1
    for p in &mut vertices {
        if (p.x - 1.0).abs() < 0.5 * h {
            p.x = 1.0;
        }
        if (p.y - 1.0).abs() < 0.5 * h {
            p.y = 1.0;
        }
    }
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut cells = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (v00, v10, v11, v01) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            cells.push([v00, v10, v11]);
            cells.push([v00, v11, v01]);
        }
    }
    Mesh::with_boundary_tags(vertices, cells, |_, _| BoundaryTag::Wall).expect("structured square mesh is valid")
}

/// Graded 1D subdivision of `[a, b]` with spacing close to `ha` at `a` and `hb` at `b`.
fn graded_line(a: f64, b: f64, ha: f64, hb: f64) -> Vec<f64> {
    let len = b - a;
    let n = ((2.0 * len / (ha + hb)).ceil() as usize).max(1);
    let alpha = 2.0 * ha / (ha + hb);
    let mut xs: Vec<f64> = (0..=n)
        .map(|k| {
            let s = k as f64 / n as f64;
            a + len * (alpha * s + (1.0 - alpha) * s * s)
        })
        .collect();
    xs[n] = b;
    xs
}

/// Concatenates graded pieces `(end, h_start, h_end)` starting at `start`.
fn breakpoints(start: f64, pieces: &[(f64, f64, f64)]) -> Vec<f64> {
    let mut out = vec![start];
    let mut a = start;
    for &(b, ha, hb) in pieces {
        let line = graded_line(a, b, ha, hb);
        out.extend_from_slice(&line[1..]);
        a = b;
    }
    out
}

/// Structured mesh generator for the channel with a square block.
///
/// The spacing is `near_h` around the block, grows linearly downstream until
/// `wake_end`, and is `far_h` at the inlet, the outlet and the walls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelMeshBuilder {
    pub near_h: f64,
    pub far_h: f64,
    pub wake_end: f64,
}

impl ChannelMeshBuilder {
    pub fn uniform(h: f64) -> Self {
        Self { near_h: h, far_h: h, wake_end: CHANNEL_LENGTH }
    }

    /// Parameter checks done by [`ChannelMeshBuilder::build`], without generating anything.
    pub fn check(&self) -> Result<(), MeshError> {
        let Self { near_h, far_h, wake_end } = *self;
        for (name, h) in [("near_h", near_h), ("far_h", far_h)] {
            if !(h > 0.0 && h < 0.1) {
                return Err(MeshError::InvalidParameter(format!("{name} = {h} must lie in (0, 0.1) to resolve the block")));
            }
        }
        if !(wake_end > BLOCK_MAX.x && wake_end <= CHANNEL_LENGTH) {
            return Err(MeshError::InvalidParameter(format!("wake_end = {wake_end} must lie in (0.25, 2.2]")));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Mesh, MeshError> {
        self.check()?;
        let Self { near_h, far_h, wake_end } = *self;
        // Both grid directions stay at or below the local h, so hypotenuses stay below 1.5 h.
        let mut xp = vec![(BLOCK_MIN.x, far_h, near_h), (BLOCK_MAX.x, near_h, near_h)];
        if wake_end < CHANNEL_LENGTH {
            xp.push((wake_end, near_h, far_h));
            xp.push((CHANNEL_LENGTH, far_h, far_h));
        } else {
            xp.push((CHANNEL_LENGTH, near_h, far_h));
        }
        let xs = breakpoints(0.0, &xp);
        let ys = breakpoints(0.0, &[(BLOCK_MIN.y, far_h, near_h), (BLOCK_MAX.y, near_h, near_h), (CHANNEL_HEIGHT, near_h, far_h)]);
        Ok(tensor_channel(&xs, &ys))
    }
}

fn inside_block(x: f64, y: f64) -> bool {
    x > BLOCK_MIN.x && x < BLOCK_MAX.x && y > BLOCK_MIN.y && y < BLOCK_MAX.y
}

fn channel_tag(a: Point, b: Point) -> BoundaryTag {
    let m = a.midpoint(b);
    let tol = 1e-12;
    if m.x.abs() < tol {
        BoundaryTag::Inflow
    } else if (m.x - CHANNEL_LENGTH).abs() < tol {
        BoundaryTag::Outflow
    } else if m.y.abs() < tol || (m.y - CHANNEL_HEIGHT).abs() < tol {
        BoundaryTag::Wall
    } else {
        BoundaryTag::Block
    }
}

fn tensor_channel(xs: &[f64], ys: &[f64]) -> Mesh {
    let (nx, ny) = (xs.len(), ys.len());
    let mut id = vec![usize::MAX; nx * ny];
    let mut vertices = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if !inside_block(xs[i], ys[j]) {
                id[j * nx + i] = vertices.len();
                vertices.push(Point::new(xs[i], ys[j]));
            }
        }
    }
    let mut cells = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let cx = 0.5 * (xs[i] + xs[i + 1]);
            let cy = 0.5 * (ys[j] + ys[j + 1]);
            if inside_block(cx, cy) {
                continue;
            }
            let v00 = id[j * nx + i];
            let v10 = id[j * nx + i + 1];
            let v11 = id[(j + 1) * nx + i + 1];
            let v01 = id[(j + 1) * nx + i];
            // diagonals run radially from the block center so the mesh mirrors across its axes
            if (cx - BLOCK_CENTER.x) * (cy - BLOCK_CENTER.y) > 0.0 {
                cells.push([v00, v10, v11]);
                cells.push([v00, v11, v01]);
            } else {
                cells.push([v00, v10, v01]);
                cells.push([v10, v11, v01]);
            }
        }
    }
    Mesh::with_boundary_tags(vertices, cells, channel_tag).expect("structured channel mesh is valid")
}

/// Channel `[0, 2.2] × [0, 0.41]` minus the block `[0.15, 0.25]²`, with
/// uniform spacing at most `target_h` in each direction.
pub fn channel_block_mesh(target_h: f64) -> Result<Mesh, MeshError> {
    ChannelMeshBuilder::uniform(target_h).build()
}

/// Splits every cell into three around its barycenter. Boundary edges and
/// their tags are unchanged; new vertices are appended after the old ones.
pub fn barycentric_refine(m: &Mesh) -> Mesh {
    let mut vertices = m.vertices().to_vec();
    let mut cells = Vec::with_capacity(3 * m.num_cells());
    for c in m.cells() {
        let [a, b, d] = [vertices[c[0]], vertices[c[1]], vertices[c[2]]];
        let g = vertices.len();
        vertices.push(Point::new((a.x + b.x + d.x) / 3.0, (a.y + b.y + d.y) / 3.0));
        cells.push([c[0], c[1], g]);
        cells.push([c[1], c[2], g]);
        cells.push([c[2], c[0], g]);
    }
    Mesh::new(vertices, cells, m.boundary_edges().to_vec()).expect("refinement of a valid mesh is valid")
}
