//! Compressed sparse row matrices.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Row-compressed structure shared by matrices assembled on the same mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    diag: Vec<usize>,
}

impl Pattern {
    /// Builds a pattern from per-row column lists (duplicates are merged).
    /// Every row receives a diagonal entry.
    pub fn from_rows(mut rows: Vec<Vec<usize>>) -> Result<Self> {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut diag = Vec::with_capacity(n);
        row_ptr.push(0);
        for (i, cols) in rows.iter_mut().enumerate() {
            cols.push(i);
            cols.sort_unstable();
            cols.dedup();
            if let Some(&c) = cols.last() {
                if c >= n {
                    return Err(Error::Dimension { expected: n, found: c + 1 });
                }
            }
            let start = col_idx.len();
            diag.push(start + cols.binary_search(&i).expect("diagonal inserted above"));
            col_idx.extend_from_slice(cols);
            row_ptr.push(col_idx.len());
        }
        Ok(Self { n, row_ptr, col_idx, diag })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    /// Position of `(row, col)` in the value array.
    pub fn find(&self, row: usize, col: usize) -> Option<usize> {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        self.col_idx[range.clone()].binary_search(&col).ok().map(|k| range.start + k)
    }

    pub fn diag_pos(&self, row: usize) -> usize {
        self.diag[row]
    }
}

/// Square CSR matrix; columns within a row are sorted and unique.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pattern: Arc<Pattern>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(pattern: Arc<Pattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self { pattern, values }
    }

    /// Assembles from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows = vec![Vec::new(); n];
        for &(r, c, _) in triplets {
            if r >= n || c >= n {
                return Err(Error::Dimension { expected: n, found: r.max(c) + 1 });
            }
            rows[r].push(c);
        }
        let pattern = Arc::new(Pattern::from_rows(rows)?);
        let mut m = Self::zeros(pattern);
        for &(r, c, v) in triplets {
            let k = m.pattern.find(r, c).expect("entry in pattern");
            m.values[k] += v;
        }
        Ok(m)
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut trip = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension { expected: n, found: row.len() });
            }
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(n, &trip)
    }

    pub fn identity(n: usize) -> Self {
        let trip: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, &trip).expect("valid identity")
    }

    pub fn dim(&self) -> usize {
        self.pattern.n
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pattern.find(row, col).map_or(0.0, |k| self.values[k])
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1];
        self.pattern.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn add_to_diagonal(&mut self, i: usize, v: f64) {
        let k = self.pattern.diag[i];
        self.values[k] += v;
    }

    /// Replaces row `i` by the identity row.
    pub fn set_identity_row(&mut self, i: usize) {
        let r = self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1];
        for v in &mut self.values[r] {
            *v = 0.0;
        }
        let k = self.pattern.diag[i];
        self.values[k] = 1.0;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim()).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn transpose_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        for (i, &xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
        y
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut d = vec![vec![0.0; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    /// `self - other`, which must share the same pattern.
    pub fn difference_norm(&self, other: &SparseMatrix) -> Result<f64> {
        if self.pattern != other.pattern {
            return Err(Error::Dimension { expected: self.pattern.nnz(), found: other.pattern.nnz() });
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }
}
