//! Plain-text mesh format: a `NV NC NB` header, then `NV` lines `x y`,
//! `NC` lines `i j k` (0-based, counter-clockwise) and `NB` lines `i j TAG`.

use std::fmt::Write as _;
use std::path::Path;

use super::{BoundaryTag, Mesh, MeshError, Point};

pub fn write_mesh(m: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} {} {}", m.num_vertices(), m.num_cells(), m.boundary_edges().len());
    for p in m.vertices() {
        // `{:?}` prints the shortest string that round-trips.
        let _ = writeln!(s, "{:?} {:?}", p.x, p.y);
    }
    for c in m.cells() {
        let _ = writeln!(s, "{} {} {}", c[0], c[1], c[2]);
    }
    for ([a, b], t) in m.boundary_edges() {
        let _ = writeln!(s, "{a} {b} {t}");
    }
    s
}

pub fn save_mesh(m: &Mesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    std::fs::write(path, write_mesh(m))?;
    Ok(())
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh, MeshError> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    /// Next non-blank line with its 1-based number.
    fn next_fields(&mut self, what: &str) -> Result<(usize, Vec<&'a str>), MeshError> {
        for (i, line) in self.inner.by_ref() {
            self.last = i + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if !fields.is_empty() {
                return Ok((i + 1, fields));
            }
        }
        Err(MeshError::Parse { line: self.last + 1, msg: format!("unexpected end of file, expected {what}") })
    }
}

fn field<T: std::str::FromStr>(line: usize, fields: &[&str], k: usize, what: &str) -> Result<T, MeshError> {
    fields
        .get(k)
        .ok_or_else(|| MeshError::Parse { line, msg: format!("missing {what}") })?
        .parse()
        .map_err(|_| MeshError::Parse { line, msg: format!("cannot parse {what} from {:?}", fields[k]) })
}

fn arity(line: usize, fields: &[&str], n: usize) -> Result<(), MeshError> {
    if fields.len() != n {
        return Err(MeshError::Parse { line, msg: format!("expected {n} fields, found {}", fields.len()) });
    }
    Ok(())
}

pub fn parse_mesh(text: &str) -> Result<Mesh, MeshError> {
    let mut lines = Lines { inner: text.lines().enumerate(), last: 0 };
    let (ln, f) = lines.next_fields("header")?;
    arity(ln, &f, 3)?;
    let nv: usize = field(ln, &f, 0, "vertex count")?;
    let nc: usize = field(ln, &f, 1, "cell count")?;
    let nb: usize = field(ln, &f, 2, "boundary edge count")?;
    // Guard allocations against absurd headers.
    let cap = |n: usize| n.min(text.len());

    let mut vertices = Vec::with_capacity(cap(nv));
    for _ in 0..nv {
        let (ln, f) = lines.next_fields("vertex")?;
        arity(ln, &f, 2)?;
        let p = Point::new(field(ln, &f, 0, "x")?, field(ln, &f, 1, "y")?);
        if !p.x.is_finite() || !p.y.is_finite() {
            return Err(MeshError::Parse { line: ln, msg: "non-finite coordinate".into() });
        }
        vertices.push(p);
    }
    let index = |ln: usize, f: &[&str], k: usize| -> Result<usize, MeshError> {
        let v: usize = field(ln, f, k, "vertex index")?;
        if v >= nv {
            return Err(MeshError::Parse { line: ln, msg: format!("vertex index {v} out of range (NV = {nv})") });
        }
        Ok(v)
    };
    let mut cells = Vec::with_capacity(cap(nc));
    for _ in 0..nc {
        let (ln, f) = lines.next_fields("cell")?;
        arity(ln, &f, 3)?;
        cells.push([index(ln, &f, 0)?, index(ln, &f, 1)?, index(ln, &f, 2)?]);
    }
    let mut boundary = Vec::with_capacity(cap(nb));
    for _ in 0..nb {
        let (ln, f) = lines.next_fields("boundary edge")?;
        arity(ln, &f, 3)?;
        let tag = BoundaryTag::parse(f[2]).ok_or_else(|| MeshError::Parse { line: ln, msg: format!("unknown tag {:?}", f[2]) })?;
        boundary.push(([index(ln, &f, 0)?, index(ln, &f, 1)?], tag));
    }
    if let Ok((ln, _)) = lines.next_fields("") {
        return Err(MeshError::Parse { line: ln, msg: "trailing content after boundary edges".into() });
    }
    Mesh::new(vertices, cells, boundary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{channel_block_mesh, unit_square_mesh};

    #[test]
    fn round_trip() {
        for m in [unit_square_mesh(4), channel_block_mesh(0.05).unwrap()] {
            let back = parse_mesh(&write_mesh(&m)).unwrap();
            assert_eq!(back, m);
            assert_eq!(back.hash_hex(), m.hash_hex());
        }
    }

    #[test]
    fn round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("square.mesh");
        let m = unit_square_mesh(3);
        save_mesh(&m, &path).unwrap();
        assert_eq!(load_mesh(&path).unwrap(), m);
    }

    #[test]
    fn out_of_range_index_is_parse_error() {
        let text = "3 1 3\n0 0\n1 0\n0 1\n0 1 3\n0 1 WALL\n1 2 WALL\n2 0 WALL\n";
        match parse_mesh(text).unwrap_err() {
            MeshError::Parse { line, .. } => assert_eq!(line, 5),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn negative_area_is_validation_error() {
        let text = "3 1 3\n0 0\n1 0\n0 1\n0 2 1\n0 1 WALL\n1 2 WALL\n2 0 WALL\n";
        assert!(matches!(parse_mesh(text).unwrap_err(), MeshError::NonPositiveArea { .. }));
    }

    #[test]
    fn bad_tag_and_truncation() {
        let text = "3 1 3\n0 0\n1 0\n0 1\n0 1 2\n0 1 WALL\n1 2 SIDE\n2 0 WALL\n";
        assert!(matches!(parse_mesh(text).unwrap_err(), MeshError::Parse { line: 7, .. }));
        assert!(matches!(parse_mesh("3 1 3\n0 0\n").unwrap_err(), MeshError::Parse { .. }));
        assert!(matches!(parse_mesh("").unwrap_err(), MeshError::Parse { line: 1, .. }));
    }
}
