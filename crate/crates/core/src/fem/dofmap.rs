use std::sync::{Arc, OnceLock};

use crate::linalg::SparseMatrix;
use crate::mesh::{BoundaryTag, Mesh, Point, PointLocator};

/// Taylor-Hood P2/P1 numbering on a mesh.
///
/// Scalar P2 nodes are the vertices followed by the edge midpoints. A velocity
/// dof is `comp * num_nodes() + node`; a pressure dof is a vertex index.
#[derive(Debug)]
pub struct DofMap {
    mesh: Arc<Mesh>,
    nodes: Vec<Point>,
    cell_nodes: Vec<[usize; 6]>,
    tag_nodes: Vec<(BoundaryTag, Vec<usize>)>,
    boundary_nodes: Vec<usize>,
    pattern: OnceLock<P2Pattern>,
    p1_pattern: OnceLock<P2Pattern>,
    locator: OnceLock<PointLocator>,
}

/// CSR pattern shared by every scalar matrix on a space, with the position of
/// each local entry of each cell.
#[derive(Debug)]
pub struct P2Pattern {
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    /// `pos[c][6 * i + j]` is the data index of local entry `(i, j)` (P1 uses the first 3×3).
    pub pos: Vec<Vec<usize>>,
}

impl P2Pattern {
    fn build(n: usize, cells: &[Vec<usize>]) -> Self {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for c in cells {
            for &i in c {
                rows[i].extend_from_slice(c);
            }
        }
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        indptr.push(0);
        for r in &mut rows {
            r.sort_unstable();
            r.dedup();
            indices.extend_from_slice(r);
            indptr.push(indices.len());
        }
        let pos = cells
            .iter()
            .map(|c| {
                let mut p = Vec::with_capacity(c.len() * c.len());
                for &i in c {
                    let row = &indices[indptr[i]..indptr[i + 1]];
                    for &j in c {
                        p.push(indptr[i] + row.binary_search(&j).expect("pattern contains cell couplings"));
                    }
                }
                p
            })
            .collect();
        Self { indptr, indices, pos }
    }

    pub fn matrix(&self, n: usize, data: Vec<f64>) -> SparseMatrix {
        SparseMatrix::from_raw(n, n, self.indptr.clone(), self.indices.clone(), data).expect("pattern is valid CSR")
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

impl DofMap {
    pub fn new(mesh: Arc<Mesh>) -> Self {
        let nv = mesh.num_vertices();
        let mut nodes = mesh.vertices().to_vec();
        for [a, b] in mesh.edges() {
            nodes.push(mesh.vertices()[*a].midpoint(mesh.vertices()[*b]));
        }
        let cell_nodes = mesh
            .cells()
            .iter()
            .zip(mesh.cell_edges())
            .map(|(c, e)| [c[0], c[1], c[2], nv + e[0], nv + e[1], nv + e[2]])
            .collect();
        let mut tag_nodes: Vec<(BoundaryTag, Vec<usize>)> = Vec::new();
        for (e, [a, b]) in mesh.edges().iter().enumerate() {
            let Some(tag) = mesh.edge_tag(e) else { continue };
            let list = match tag_nodes.iter_mut().find(|(t, _)| *t == tag) {
                Some((_, l)) => l,
                None => {
                    tag_nodes.push((tag, Vec::new()));
                    &mut tag_nodes.last_mut().expect("just pushed").1
                }
            };
            list.extend_from_slice(&[*a, *b, nv + e]);
        }
        let mut boundary_nodes = Vec::new();
        for (_, l) in &mut tag_nodes {
            l.sort_unstable();
            l.dedup();
            boundary_nodes.extend_from_slice(l);
        }
        tag_nodes.sort_by_key(|(t, _)| *t);
        boundary_nodes.sort_unstable();
        boundary_nodes.dedup();
        Self {
            mesh,
            nodes,
            cell_nodes,
            tag_nodes,
            boundary_nodes,
            pattern: OnceLock::new(),
            p1_pattern: OnceLock::new(),
            locator: OnceLock::new(),
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// Scalar P2 node count, `NV + NE`.
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_velocity_dofs(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn num_pressure_dofs(&self) -> usize {
        self.mesh.num_vertices()
    }

    pub fn node_points(&self) -> &[Point] {
        &self.nodes
    }

    pub fn cell_nodes(&self) -> &[[usize; 6]] {
        &self.cell_nodes
    }

    pub fn velocity_dof(&self, comp: usize, node: usize) -> usize {
        comp * self.nodes.len() + node
    }

    /// Scalar nodes on edges carrying `tag` (sorted).
    pub fn boundary_nodes_with_tag(&self, tag: BoundaryTag) -> &[usize] {
        self.tag_nodes.iter().find(|(t, _)| *t == tag).map_or(&[], |(_, l)| l.as_slice())
    }

    /// Every scalar node on the boundary (sorted).
    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    /// Velocity dofs carrying the normal component on some boundary edge, sorted.
    ///
    /// On an axis-aligned edge that is one component per node; on an oblique
    /// edge both components are returned, since a single normal component
    /// is not a coordinate there.
    pub fn normal_velocity_dofs(&self) -> Vec<usize> {
        let mesh = &self.mesh;
        let nn = self.num_nodes();
        let nv = mesh.num_vertices();
        let mut out = Vec::new();
        for (e, [a, b]) in mesh.edges().iter().enumerate() {
            if mesh.edge_tag(e).is_none() {
                continue;
            }
            let (pa, pb) = (mesh.vertices()[*a], mesh.vertices()[*b]);
            let len = pa.dist(pb);
            let (dx, dy) = ((pb.x - pa.x) / len, (pb.y - pa.y) / len);
            let comps: &[usize] = if dx.abs() < 1e-12 {
                &[0]
            } else if dy.abs() < 1e-12 {
                &[1]
            } else {
                &[0, 1]
            };
            for node in [*a, *b, nv + e] {
                out.extend(comps.iter().map(|c| c * nn + node));
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn p2_pattern(&self) -> &P2Pattern {
        self.pattern.get_or_init(|| {
            let cells: Vec<Vec<usize>> = self.cell_nodes.iter().map(|c| c.to_vec()).collect();
            P2Pattern::build(self.nodes.len(), &cells)
        })
    }

    pub fn p1_pattern(&self) -> &P2Pattern {
        self.p1_pattern.get_or_init(|| {
            let cells: Vec<Vec<usize>> = self.mesh.cells().iter().map(|c| c.to_vec()).collect();
            P2Pattern::build(self.mesh.num_vertices(), &cells)
        })
    }

    pub fn locator(&self) -> &PointLocator {
        self.locator.get_or_init(|| PointLocator::new(&self.mesh))
    }
}
