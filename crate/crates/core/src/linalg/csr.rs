//! Compressed-row sparse matrices.

use super::LinalgError;

/// A real matrix in compressed-row layout.
///
/// Column indices are sorted and unique within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

/// Accumulates `(row, col, value)` entries; duplicates are summed on conversion.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, ..Default::default() }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self {
            nrows,
            ncols,
            rows: Vec::with_capacity(cap),
            cols: Vec::with_capacity(cap),
            vals: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, val: f64) {
        debug_assert!(row < self.nrows && col < self.ncols, "triplet ({row}, {col}) out of bounds");
        self.rows.push(row);
        self.cols.push(col);
        self.vals.push(val);
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    pub fn build(self) -> SparseMatrix {
        // Bucket by row, then sort and merge each row.
        let mut counts = vec![0usize; self.nrows + 1];
        for &r in &self.rows {
            counts[r + 1] += 1;
        }
        for i in 0..self.nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut order = vec![0usize; self.vals.len()];
        for (k, &r) in self.rows.iter().enumerate() {
            order[next[r]] = k;
            next[r] += 1;
        }

        let mut indptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::with_capacity(self.vals.len());
        let mut data = Vec::with_capacity(self.vals.len());
        indptr.push(0);
        let mut row_buf: Vec<(usize, f64)> = Vec::new();
        for r in 0..self.nrows {
            row_buf.clear();
            row_buf.extend(order[counts[r]..counts[r + 1]].iter().map(|&k| (self.cols[k], self.vals[k])));
            row_buf.sort_unstable_by_key(|e| e.0);
            let mut iter = row_buf.iter();
            if let Some(&(c0, v0)) = iter.next() {
                let (mut cur_c, mut cur_v) = (c0, v0);
                for &(c, v) in iter {
                    if c == cur_c {
                        cur_v += v;
                    } else {
                        indices.push(cur_c);
                        data.push(cur_v);
                        cur_c = c;
                        cur_v = v;
                    }
                }
                indices.push(cur_c);
                data.push(cur_v);
            }
            indptr.push(indices.len());
        }
        SparseMatrix { nrows: self.nrows, ncols: self.ncols, indptr, indices, data }
    }
}

impl SparseMatrix {
    /// Builds a matrix from raw compressed-row arrays, checking every layout invariant.
    pub fn from_raw(
        nrows: usize,
        ncols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        data: Vec<f64>,
    ) -> Result<Self, LinalgError> {
        let bad = |msg: &str| Err(LinalgError::InvalidLayout(msg.to_string()));
        if indptr.len() != nrows + 1 || indptr[0] != 0 {
            return bad("row offsets must have length nrows+1 and start at 0");
        }
        if indices.len() != data.len() || *indptr.last().unwrap() != indices.len() {
            return bad("offsets, indices and values disagree in length");
        }
        for r in 0..nrows {
            if indptr[r] > indptr[r + 1] {
                return bad("row offsets must be monotone");
            }
            let row = &indices[indptr[r]..indptr[r + 1]];
            if row.iter().any(|&c| c >= ncols) {
                return bad("column index out of range");
            }
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return bad("column indices must be sorted and unique per row");
            }
        }
        Ok(Self { nrows, ncols, indptr, indices, data })
    }

    pub fn from_triplets(nrows: usize, ncols: usize, entries: &[(usize, usize, f64)]) -> Self {
        let mut b = TripletBuilder::with_capacity(nrows, ncols, entries.len());
        for &(r, c, v) in entries {
            b.push(r, c, v);
        }
        b.build()
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), data: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: diag.to_vec(),
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut b = TripletBuilder::new(nrows, ncols);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    b.push(i, j, v);
                }
            }
        }
        b.build()
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `(column, value)` pairs of row `r`.
    #[inline]
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.data[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(k) => self.data[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn same_pattern(&self, other: &SparseMatrix) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.indptr == other.indptr
            && self.indices == other.indices
    }

    /// `y = A x`.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if x.len() != self.ncols {
            return Err(LinalgError::DimensionMismatch { expected: self.ncols, found: x.len() });
        }
        let mut y = vec![0.0; self.nrows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// `y = A x` without allocation; panics on mismatched lengths.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.data[k] * x[self.indices[k]];
            }
            *yr = acc;
        }
    }

    /// `y = Aᵀ x`.
    pub fn spmv_transpose(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if x.len() != self.nrows {
            return Err(LinalgError::DimensionMismatch { expected: self.nrows, found: x.len() });
        }
        let mut y = vec![0.0; self.ncols];
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            for k in self.indptr[r]..self.indptr[r + 1] {
                y[self.indices[k]] += self.data[k] * xr;
            }
        }
        Ok(y)
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for i in 0..self.ncols {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut indices = vec![0usize; self.nnz()];
        let mut data = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k];
                indices[next[c]] = r;
                data[next[c]] = self.data[k];
                next[c] += 1;
            }
        }
        SparseMatrix { nrows: self.ncols, ncols: self.nrows, indptr: counts, indices, data }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn scaled(&self, s: f64) -> SparseMatrix {
        let mut m = self.clone();
        m.scale(s);
        m
    }

    /// `Σ αᵢ Aᵢ` over matrices of equal shape but possibly different patterns.
    pub fn linear_combination(terms: &[(f64, &SparseMatrix)]) -> Result<SparseMatrix, LinalgError> {
        let (nrows, ncols) = match terms.first() {
            Some((_, m)) => (m.nrows, m.ncols),
            None => return Err(LinalgError::InvalidLayout("empty linear combination".into())),
        };
        for (_, m) in terms {
            if m.nrows != nrows || m.ncols != ncols {
                return Err(LinalgError::ShapeMismatch {
                    left: (nrows, ncols),
                    right: (m.nrows, m.ncols),
                });
            }
        }
        if terms.iter().all(|(_, m)| m.same_pattern(terms[0].1)) {
            let mut out = terms[0].1.scaled(terms[0].0);
            for (a, m) in &terms[1..] {
                for (o, v) in out.data.iter_mut().zip(&m.data) {
                    *o += a * v;
                }
            }
            return Ok(out);
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        let mut acc: Vec<f64> = vec![0.0; ncols];
        let mut seen: Vec<bool> = vec![false; ncols];
        let mut cols: Vec<usize> = Vec::new();
        for r in 0..nrows {
            cols.clear();
            for (a, m) in terms {
                for (c, v) in m.row(r) {
                    if !seen[c] {
                        seen[c] = true;
                        cols.push(c);
                    }
                    acc[c] += a * v;
                }
            }
            cols.sort_unstable();
            for &c in &cols {
                indices.push(c);
                data.push(acc[c]);
                acc[c] = 0.0;
                seen[c] = false;
            }
            indptr.push(indices.len());
        }
        Ok(SparseMatrix { nrows, ncols, indptr, indices, data })
    }

    /// Sparse product `A B`.
    pub fn matmul(&self, other: &SparseMatrix) -> Result<SparseMatrix, LinalgError> {
        if self.ncols != other.nrows {
            return Err(LinalgError::ShapeMismatch {
                left: (self.nrows, self.ncols),
                right: (other.nrows, other.ncols),
            });
        }
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        let mut acc = vec![0.0; other.ncols];
        let mut seen = vec![false; other.ncols];
        let mut cols = Vec::new();
        for r in 0..self.nrows {
            cols.clear();
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if !seen[c] {
                        seen[c] = true;
                        cols.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            cols.sort_unstable();
            for &c in &cols {
                indices.push(c);
                data.push(acc[c]);
                acc[c] = 0.0;
                seen[c] = false;
            }
            indptr.push(indices.len());
        }
        Ok(SparseMatrix { nrows: self.nrows, ncols: other.ncols, indptr, indices, data })
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let t = self.transpose();
        match SparseMatrix::linear_combination(&[(1.0, self), (-1.0, &t)]) {
            Ok(d) => d.data.iter().fold(0.0, |m, v| m.max(v.abs())),
            Err(_) => f64::INFINITY,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] = v;
            }
        }
        out
    }

    /// Places `blocks[i][j]` at block position (i, j). `None` blocks are zero.
    pub fn block(blocks: &[Vec<Option<&SparseMatrix>>]) -> Result<SparseMatrix, LinalgError> {
        let nbr = blocks.len();
        let nbc = blocks.first().map_or(0, |r| r.len());
        let mut row_sizes = vec![None; nbr];
        let mut col_sizes = vec![None; nbc];
        for (i, brow) in blocks.iter().enumerate() {
            if brow.len() != nbc {
                return Err(LinalgError::InvalidLayout("ragged block layout".into()));
            }
            for (j, b) in brow.iter().enumerate() {
                if let Some(m) = b {
                    for (slot, n) in [(&mut row_sizes[i], m.nrows), (&mut col_sizes[j], m.ncols)] {
                        match slot {
                            Some(s) if *s != n => {
                                return Err(LinalgError::InvalidLayout("inconsistent block sizes".into()))
                            }
                            _ => *slot = Some(n),
                        }
                    }
                }
            }
        }
        let row_sizes: Vec<usize> = row_sizes.into_iter().map(|s| s.unwrap_or(0)).collect();
        let col_sizes: Vec<usize> = col_sizes.into_iter().map(|s| s.unwrap_or(0)).collect();
        let row_off: Vec<usize> = offsets(&row_sizes);
        let col_off: Vec<usize> = offsets(&col_sizes);
        let nnz: usize = blocks.iter().flatten().flatten().map(|m| m.nnz()).sum();
        let mut b = TripletBuilder::with_capacity(row_off[nbr], col_off[nbc], nnz);
        for (i, brow) in blocks.iter().enumerate() {
            for (j, m) in brow.iter().enumerate() {
                if let Some(m) = m {
                    for r in 0..m.nrows {
                        for (c, v) in m.row(r) {
                            b.push(row_off[i] + r, col_off[j] + c, v);
                        }
                    }
                }
            }
        }
        Ok(b.build())
    }

    /// Keeps only the listed rows and columns, in the given order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> SparseMatrix {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut b = TripletBuilder::new(rows.len(), cols.len());
        for (i, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                if col_map[c] != usize::MAX {
                    b.push(i, col_map[c], v);
                }
            }
        }
        b.build()
    }
}

fn offsets(sizes: &[usize]) -> Vec<usize> {
    let mut off = Vec::with_capacity(sizes.len() + 1);
    off.push(0);
    for s in sizes {
        off.push(off.last().unwrap() + s);
    }
    off
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sparse(rng: &mut ChaCha8Rng, n: usize, m: usize, density: f64) -> (SparseMatrix, Vec<Vec<f64>>) {
        let mut dense = vec![vec![0.0; m]; n];
        let mut b = TripletBuilder::new(n, m);
        for (i, row) in dense.iter_mut().enumerate() {
            for (j, slot) in row.iter_mut().enumerate() {
                if rng.gen::<f64>() < density {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    *slot += v;
                    b.push(i, j, v);
                }
            }
        }
        (b.build(), dense)
    }

    #[test]
    fn identity_times_x_is_x() {
        let x: Vec<f64> = (0..7).map(|i| i as f64 * 0.5 - 1.0).collect();
        assert_eq!(SparseMatrix::identity(7).spmv(&x).unwrap(), x);
    }

    #[test]
    fn a_times_zero_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (a, _) = random_sparse(&mut rng, 12, 9, 0.3);
        assert!(a.spmv(&[0.0; 9]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn spmv_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (a, dense) = random_sparse(&mut rng, 50, 50, 0.1);
        let x: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = a.spmv(&x).unwrap();
        for i in 0..50 {
            let expect: f64 = (0..50).map(|j| dense[i][j] * x[j]).sum();
            assert!((y[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn spmv_rejects_wrong_length() {
        let a = SparseMatrix::identity(3);
        assert!(matches!(a.spmv(&[1.0, 2.0]), Err(LinalgError::DimensionMismatch { .. })));
    }

    #[test]
    fn duplicates_are_summed_and_sorted() {
        let a = SparseMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (0, 0, 2.0), (0, 2, 0.5), (1, 1, -1.0)]);
        assert_eq!(a.indptr(), &[0, 2, 3]);
        assert_eq!(a.indices(), &[0, 2, 1]);
        assert_eq!(a.values(), &[2.0, 1.5, -1.0]);
    }

    #[test]
    fn from_raw_rejects_unsorted_columns() {
        let err = SparseMatrix::from_raw(1, 3, vec![0, 2], vec![2, 1], vec![1.0, 1.0]);
        assert!(err.is_err());
    }

    #[test]
    fn matmul_and_transpose_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (a, da) = random_sparse(&mut rng, 8, 6, 0.4);
        let (b, db) = random_sparse(&mut rng, 6, 5, 0.4);
        let c = a.matmul(&b).unwrap().to_dense();
        for i in 0..8 {
            for j in 0..5 {
                let e: f64 = (0..6).map(|k| da[i][k] * db[k][j]).sum();
                assert!((c[i][j] - e).abs() < 1e-14);
            }
        }
        let at = a.transpose().to_dense();
        for i in 0..8 {
            for j in 0..6 {
                assert_eq!(at[j][i], da[i][j]);
            }
        }
    }

    #[test]
    fn linear_combination_merges_patterns() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0)]);
        let b = SparseMatrix::from_triplets(2, 2, &[(0, 1, 2.0), (1, 1, 3.0)]);
        let c = SparseMatrix::linear_combination(&[(2.0, &a), (-1.0, &b)]).unwrap();
        assert_eq!(c.to_dense(), vec![vec![2.0, -2.0], vec![0.0, -3.0]]);
    }

    #[test]
    fn block_assembly_places_offsets() {
        let a = SparseMatrix::identity(2);
        let b = SparseMatrix::from_triplets(1, 2, &[(0, 1, 4.0)]);
        let bt = b.transpose();
        let k = SparseMatrix::block(&[vec![Some(&a), Some(&bt)], vec![Some(&b), None]]).unwrap();
        assert_eq!(k.to_dense(), vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 4.0], vec![0.0, 4.0, 0.0]]);
    }
}
