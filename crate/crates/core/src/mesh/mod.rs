//! Conforming triangle meshes with tagged boundary edges.

mod coarse;
mod generate;
mod io;
mod locate;

pub use coarse::CoarseGrid;
pub use generate::{barycentric_refine, channel_block_mesh, unit_square_mesh, ChannelMeshBuilder, CHANNEL_LENGTH, CHANNEL_HEIGHT, BLOCK_MIN, BLOCK_MAX};
pub use io::{load_mesh, parse_mesh, save_mesh, write_mesh};
pub use locate::{barycentric as barycentric_in, PointLocator};

use std::collections::HashMap;
use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }

    pub fn midpoint(self, o: Point) -> Point {
        Point::new(0.5 * (self.x + o.x), 0.5 * (self.y + o.y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Wall,
    Inflow,
    Outflow,
    Block,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 4] = [BoundaryTag::Wall, BoundaryTag::Inflow, BoundaryTag::Outflow, BoundaryTag::Block];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Wall => "WALL",
            BoundaryTag::Inflow => "INFLOW",
            BoundaryTag::Outflow => "OUTFLOW",
            BoundaryTag::Block => "BLOCK",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("vertex {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("cell {cell} references vertex {vertex}, but there are only {count} vertices")]
    IndexOutOfRange { cell: usize, vertex: usize, count: usize },
    #[error("cell {cell} has non-positive signed area {area:e}")]
    NonPositiveArea { cell: usize, area: f64 },
    #[error("edge ({0}, {1}) is shared by more than two cells")]
    NonConforming(usize, usize),
    #[error("boundary edge ({0}, {1}) is not on the topological boundary")]
    NotBoundary(usize, usize),
    #[error("boundary edge ({0}, {1}) is tagged more than once")]
    DuplicateTag(usize, usize),
    #[error("boundary edge ({0}, {1}) has no tag")]
    Untagged(usize, usize),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    InvalidParameter(String),
    #[error("point ({x}, {y}) is outside the mesh")]
    OutsideDomain { x: f64, y: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Sentinel for "no neighbouring cell" in [`Mesh::edge_cells`].
pub const NO_CELL: usize = usize::MAX;

/// An immutable triangulation. Edge numbering is derived on construction:
/// local edge `k` of a cell is the one opposite its vertex `k`.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    boundary: Vec<([usize; 2], BoundaryTag)>,
    edges: Vec<[usize; 2]>,
    cell_edges: Vec<[usize; 3]>,
    edge_cells: Vec<[usize; 2]>,
    edge_tags: Vec<Option<BoundaryTag>>,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

impl Mesh {
    /// Builds and validates a mesh. Cells must be counter-clockwise.
    pub fn new(vertices: Vec<Point>, cells: Vec<[usize; 3]>, boundary: Vec<([usize; 2], BoundaryTag)>) -> Result<Self, MeshError> {
        for (i, p) in vertices.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(MeshError::NonFinite(i));
            }
        }
        let nv = vertices.len();
        for (ci, c) in cells.iter().enumerate() {
            for &v in c {
                if v >= nv {
                    return Err(MeshError::IndexOutOfRange { cell: ci, vertex: v, count: nv });
                }
            }
            let area = signed_area(vertices[c[0]], vertices[c[1]], vertices[c[2]]);
            if !(area > 0.0) {
                return Err(MeshError::NonPositiveArea { cell: ci, area });
            }
        }

        let mut index: HashMap<(usize, usize), usize> = HashMap::with_capacity(cells.len() * 2);
        let mut edges = Vec::new();
        let mut edge_cells: Vec<[usize; 2]> = Vec::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        for (ci, c) in cells.iter().enumerate() {
            let mut ce = [0; 3];
            for k in 0..3 {
                let (a, b) = key(c[(k + 1) % 3], c[(k + 2) % 3]);
                let e = *index.entry((a, b)).or_insert_with(|| {
                    edges.push([a, b]);
                    edge_cells.push([NO_CELL, NO_CELL]);
                    edges.len() - 1
                });
                if edge_cells[e][0] == NO_CELL {
                    edge_cells[e][0] = ci;
                } else if edge_cells[e][1] == NO_CELL {
                    edge_cells[e][1] = ci;
                } else {
                    return Err(MeshError::NonConforming(a, b));
                }
                ce[k] = e;
            }
            cell_edges.push(ce);
        }

        let mut edge_tags = vec![None; edges.len()];
        for &([a, b], tag) in &boundary {
            let Some(&e) = index.get(&key(a, b)) else {
                return Err(MeshError::NotBoundary(a, b));
            };
            if edge_cells[e][1] != NO_CELL {
                return Err(MeshError::NotBoundary(a, b));
            }
            if edge_tags[e].is_some() {
                return Err(MeshError::DuplicateTag(a, b));
            }
            edge_tags[e] = Some(tag);
        }
        for (e, ec) in edge_cells.iter().enumerate() {
            if ec[1] == NO_CELL && edge_tags[e].is_none() {
                return Err(MeshError::Untagged(edges[e][0], edges[e][1]));
            }
        }

        Ok(Self { vertices, cells, boundary, edges, cell_edges, edge_cells, edge_tags })
    }

    /// Builds a mesh and tags every topological boundary edge with `tag_of(a, b)`.
    pub fn with_boundary_tags(
        vertices: Vec<Point>,
        cells: Vec<[usize; 3]>,
        tag_of: impl Fn(Point, Point) -> BoundaryTag,
    ) -> Result<Self, MeshError> {
        let mut count: HashMap<(usize, usize), (usize, [usize; 2])> = HashMap::new();
        for c in &cells {
            for k in 0..3 {
                let (a, b) = (c[(k + 1) % 3], c[(k + 2) % 3]);
                count.entry(key(a, b)).or_insert((0, [a, b])).0 += 1;
            }
        }
        let mut boundary: Vec<([usize; 2], BoundaryTag)> = count
            .into_values()
            .filter(|(n, _)| *n == 1)
            .map(|(_, [a, b])| ([a, b], tag_of(vertices[a], vertices[b])))
            .collect();
        boundary.sort_by_key(|(e, _)| key(e[0], e[1]));
        Self::new(vertices, cells, boundary)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn boundary_edges(&self) -> &[([usize; 2], BoundaryTag)] {
        &self.boundary
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Unique edges, each stored with its smaller vertex first.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn cell_edges(&self) -> &[[usize; 3]] {
        &self.cell_edges
    }

    /// The one or two cells adjacent to each edge; [`NO_CELL`] fills the gap.
    pub fn edge_cells(&self) -> &[[usize; 2]] {
        &self.edge_cells
    }

    pub fn edge_tag(&self, e: usize) -> Option<BoundaryTag> {
        self.edge_tags[e]
    }

    pub fn cell_points(&self, c: usize) -> [Point; 3] {
        let [a, b, d] = self.cells[c];
        [self.vertices[a], self.vertices[b], self.vertices[d]]
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        let [a, b, d] = self.cell_points(c);
        signed_area(a, b, d)
    }

    pub fn cell_diameter(&self, c: usize) -> f64 {
        let [a, b, d] = self.cell_points(c);
        a.dist(b).max(b.dist(d)).max(d.dist(a))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_cells()).map(|c| self.cell_area(c)).sum()
    }

    pub fn max_diameter(&self) -> f64 {
        (0..self.num_cells()).map(|c| self.cell_diameter(c)).fold(0.0, f64::max)
    }

    pub fn has_tag(&self, tag: BoundaryTag) -> bool {
        self.boundary.iter().any(|(_, t)| *t == tag)
    }

    /// Total length of the boundary edges carrying `tag`.
    pub fn boundary_length(&self, tag: BoundaryTag) -> f64 {
        self.boundary
            .iter()
            .filter(|(_, t)| *t == tag)
            .map(|([a, b], _)| self.vertices[*a].dist(self.vertices[*b]))
            .sum()
    }

    /// `(xmin, ymin, xmax, ymax)`.
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        self.vertices.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(x0, y0, x1, y1), p| (x0.min(p.x), y0.min(p.y), x1.max(p.x), y1.max(p.y)),
        )
    }

    /// SHA-256 over the raw coordinates, connectivity and tags, hex encoded.
    pub fn hash_hex(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.vertices.len() as u64).to_le_bytes());
        for p in &self.vertices {
            h.update(p.x.to_le_bytes());
            h.update(p.y.to_le_bytes());
        }
        h.update((self.cells.len() as u64).to_le_bytes());
        for c in &self.cells {
            for v in c {
                h.update((*v as u64).to_le_bytes());
            }
        }
        h.update((self.boundary.len() as u64).to_le_bytes());
        for ([a, b], t) in &self.boundary {
            h.update((*a as u64).to_le_bytes());
            h.update((*b as u64).to_le_bytes());
            h.update([*t as u8]);
        }
        hex::encode(h.finalize())
    }
}

impl PartialEq for Mesh {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.cells == other.cells && self.boundary == other.boundary
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_cells() -> (Vec<Point>, Vec<[usize; 3]>) {
        let v = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0), Point::new(0.0, 1.0)];
        (v, vec![[0, 1, 2], [0, 2, 3]])
    }

    #[test]
    fn topology_of_two_cells() {
        let (v, c) = two_cells();
        let m = Mesh::with_boundary_tags(v, c, |_, _| BoundaryTag::Wall).unwrap();
        assert_eq!(m.num_edges(), 5);
        assert_eq!(m.boundary_edges().len(), 4);
        let interior = m.edge_cells().iter().filter(|e| e[1] != NO_CELL).count();
        assert_eq!(interior, 1);
        // local edge k is opposite local vertex k
        for (ci, c) in m.cells().iter().enumerate() {
            for k in 0..3 {
                let e = m.edges()[m.cell_edges()[ci][k]];
                assert!(!e.contains(&c[k]));
            }
        }
    }

    #[test]
    fn clockwise_cell_rejected() {
        let (v, _) = two_cells();
        let err = Mesh::with_boundary_tags(v, vec![[0, 2, 1]], |_, _| BoundaryTag::Wall).unwrap_err();
        assert!(matches!(err, MeshError::NonPositiveArea { cell: 0, .. }));
    }

    #[test]
    fn untagged_boundary_rejected() {
        let (v, c) = two_cells();
        let err = Mesh::new(v, c, vec![([0, 1], BoundaryTag::Wall)]).unwrap_err();
        assert!(matches!(err, MeshError::Untagged(..)));
    }

    #[test]
    fn interior_edge_cannot_be_tagged() {
        let (v, c) = two_cells();
        let b = vec![
            ([0, 1], BoundaryTag::Wall),
            ([1, 2], BoundaryTag::Wall),
            ([2, 3], BoundaryTag::Wall),
            ([3, 0], BoundaryTag::Wall),
            ([0, 2], BoundaryTag::Wall),
        ];
        assert!(matches!(Mesh::new(v, c, b).unwrap_err(), MeshError::NotBoundary(0, 2)));
    }

    #[test]
    fn overshared_edge_rejected() {
        let v = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.5, 1.0), Point::new(0.5, 2.0), Point::new(0.2, 0.3)];
        let c = vec![[0, 1, 2], [0, 1, 3], [0, 1, 4]];
        assert!(Mesh::with_boundary_tags(v, c, |_, _| BoundaryTag::Wall).is_err());
    }

    #[test]
    fn hash_changes_with_coordinates() {
        let (v, c) = two_cells();
        let m1 = Mesh::with_boundary_tags(v.clone(), c.clone(), |_, _| BoundaryTag::Wall).unwrap();
        let mut v2 = v;
        v2[2].x = 1.0 + 1e-15;
        let m2 = Mesh::with_boundary_tags(v2, c, |_, _| BoundaryTag::Wall).unwrap();
        assert_ne!(m1.hash_hex(), m2.hash_hex());
        assert_eq!(m1.hash_hex().len(), 64);
    }
}
