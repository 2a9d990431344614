//! Snapshot archive: a directory holding a `meta` file of `key value` lines
//! and one `snapshot_NNNNNN.bin` file of little-endian f64 per snapshot.

use std::fs;
use std::path::{Path, PathBuf};

use super::TruthError;

#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveMeta {
    pub mesh_hash: String,
    /// Time step of the run that wrote the archive.
    pub dt: f64,
    /// Steps between snapshots.
    pub stride: usize,
    pub count: usize,
    pub nu: f64,
    pub ndofs: usize,
}

impl ArchiveMeta {
    /// Time between consecutive snapshots.
    pub fn interval(&self) -> f64 {
        self.dt * self.stride as f64
    }

    pub fn to_text(&self) -> String {
        format!(
            "mesh_hash {}\ndt {:?}\nstride {}\ncount {}\nnu {:?}\nndofs {}\n",
            self.mesh_hash, self.dt, self.stride, self.count, self.nu, self.ndofs
        )
    }

    pub fn parse(text: &str) -> Result<Self, TruthError> {
        let mut mesh_hash = None;
        let (mut dt, mut stride, mut count, mut nu, mut ndofs) = (None, None, None, None, None);
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| TruthError::Meta { line: line_no, msg };
            let (key, value) = line.split_once(char::is_whitespace).ok_or_else(|| bad(format!("expected `key value`, got {line:?}")))?;
            let value = value.trim();
            let num = |v: &str| v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| bad(format!("bad number {v:?}")));
            let int = |v: &str| v.parse::<usize>().map_err(|_| bad(format!("bad integer {v:?}")));
            let slot_taken = |taken: bool| if taken { Err(bad(format!("duplicate key {key}"))) } else { Ok(()) };
            match key {
                "mesh_hash" => {
                    slot_taken(mesh_hash.is_some())?;
                    if value.len() != 64 || !value.bytes().all(|b| b.is_ascii_hexdigit()) {
                        return Err(bad("mesh_hash must be 64 hex digits".into()));
                    }
                    mesh_hash = Some(value.to_string());
                }
                "dt" => {
                    slot_taken(dt.is_some())?;
                    dt = Some(num(value)?);
                }
                "stride" => {
                    slot_taken(stride.is_some())?;
                    stride = Some(int(value)?);
                }
                "count" => {
                    slot_taken(count.is_some())?;
                    count = Some(int(value)?);
                }
                "nu" => {
                    slot_taken(nu.is_some())?;
                    nu = Some(num(value)?);
                }
                "ndofs" => {
                    slot_taken(ndofs.is_some())?;
                    ndofs = Some(int(value)?);
                }
                _ => return Err(bad(format!("unknown key {key}"))),
            }
        }
        let missing = |k: &str| TruthError::Meta { line: 0, msg: format!("missing key {k}") };
        let meta = Self {
            mesh_hash: mesh_hash.ok_or_else(|| missing("mesh_hash"))?,
            dt: dt.ok_or_else(|| missing("dt"))?,
            stride: stride.ok_or_else(|| missing("stride"))?,
            count: count.ok_or_else(|| missing("count"))?,
            nu: nu.ok_or_else(|| missing("nu"))?,
            ndofs: ndofs.ok_or_else(|| missing("ndofs"))?,
        };
        if !(meta.dt > 0.0) || meta.stride == 0 {
            return Err(TruthError::Meta { line: 0, msg: "dt must be positive and stride at least 1".into() });
        }
        Ok(meta)
    }
}

pub fn encode_snapshot(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn decode_snapshot(bytes: &[u8], ndofs: usize) -> Result<Vec<f64>, TruthError> {
    if bytes.len() != 8 * ndofs {
        return Err(TruthError::SnapshotSize { expected: 8 * ndofs, found: bytes.len() });
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect())
}

pub fn snapshot_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("snapshot_{k:06}.bin"))
}

/// Streams snapshots to disk; `meta` is rewritten with the final count on [`ArchiveWriter::finish`].
#[derive(Debug)]
pub struct ArchiveWriter {
    dir: PathBuf,
    meta: ArchiveMeta,
    step: usize,
}

impl ArchiveWriter {
    /// `meta.count` is ignored and tracked by the writer.
    pub fn create(dir: impl AsRef<Path>, mut meta: ArchiveMeta) -> Result<Self, TruthError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        meta.count = 0;
        fs::write(dir.join("meta"), meta.to_text())?;
        Ok(Self { dir, meta, step: 0 })
    }

    /// Offers the state after time step `step` (0 = initial state); it is
    /// stored when `step` is a multiple of the stride.
    pub fn offer(&mut self, step: usize, values: &[f64]) -> Result<(), TruthError> {
        if values.len() != self.meta.ndofs {
            return Err(TruthError::SnapshotSize { expected: 8 * self.meta.ndofs, found: 8 * values.len() });
        }
        self.step = step;
        if step % self.meta.stride == 0 {
            let k = step / self.meta.stride;
            if k != self.meta.count {
                return Err(TruthError::Meta { line: 0, msg: format!("snapshot {k} offered out of order (have {})", self.meta.count) });
            }
            fs::write(snapshot_path(&self.dir, k), encode_snapshot(values))?;
            self.meta.count += 1;
        }
        Ok(())
    }

    pub fn finish(self) -> Result<ArchiveMeta, TruthError> {
        fs::write(self.dir.join("meta"), self.meta.to_text())?;
        Ok(self.meta)
    }
}

pub fn read_meta(dir: impl AsRef<Path>) -> Result<ArchiveMeta, TruthError> {
    ArchiveMeta::parse(&fs::read_to_string(dir.as_ref().join("meta"))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> ArchiveMeta {
        ArchiveMeta { mesh_hash: "ab".repeat(32), dt: 0.002, stride: 2, count: 0, nu: 1e-3, ndofs: 3 }
    }

    #[test]
    fn meta_round_trip() {
        let mut m = meta();
        m.count = 17;
        assert_eq!(ArchiveMeta::parse(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn meta_errors_have_lines() {
        let text = meta().to_text().replace("stride 2", "stride two");
        assert!(matches!(ArchiveMeta::parse(&text), Err(TruthError::Meta { line: 3, .. })));
        assert!(ArchiveMeta::parse("dt 1\n").is_err());
        let dup = format!("{}dt 0.1\n", meta().to_text());
        assert!(ArchiveMeta::parse(&dup).is_err());
    }

    #[test]
    fn snapshot_bits_round_trip() {
        let v = vec![0.1, -0.0, f64::MIN_POSITIVE, 1e300, std::f64::consts::PI];
        let back = decode_snapshot(&encode_snapshot(&v), v.len()).unwrap();
        assert!(v.iter().zip(&back).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!(decode_snapshot(&[0u8; 7], 1).is_err());
    }

    #[test]
    fn writer_honours_stride() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = ArchiveWriter::create(dir.path(), meta()).unwrap();
        for step in 0..5 {
            w.offer(step, &[step as f64; 3]).unwrap();
        }
        let m = w.finish().unwrap();
        assert_eq!(m.count, 3);
        assert_eq!(read_meta(dir.path()).unwrap(), m);
        let bytes = std::fs::read(snapshot_path(dir.path(), 2)).unwrap();
        assert_eq!(decode_snapshot(&bytes, 3).unwrap(), vec![4.0; 3]);
    }
}
