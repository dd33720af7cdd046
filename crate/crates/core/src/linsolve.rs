//! Direct sparse LU factorization.
//!
//! Left-looking (Gilbert–Peierls) elimination on a column ordering from
//! approximate minimum degree applied to the pattern of `A + Aᵀ`. Rows are
//! first scaled by their absolute sums; pivots are then chosen by threshold
//! partial pivoting with a preference for the diagonal, so `P R A Q = L U`
//! with `L` unit lower triangular.

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Diagonal entries are accepted as pivots when at least this fraction of the
/// largest candidate in their column.
pub const DEFAULT_PIVOT_THRESHOLD: f64 = 0.1;

/// Compressed sparse column storage used for the factors.
#[derive(Debug, Clone, Default)]
struct Csc {
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

/// LU factors with row and column permutations.
#[derive(Debug, Clone)]
pub struct Factorization {
    n: usize,
    lower: Csc,
    upper: Csc,
    /// `row_perm[i]` is the pivot step at which original row `i` was eliminated.
    row_perm: Vec<usize>,
    /// `col_order[k]` is the original column eliminated at step `k`.
    col_order: Vec<usize>,
    row_scale: Vec<f64>,
    pivot_growth: f64,
}

fn to_csc(a: &SparseMatrix, row_scale: &[f64]) -> Csc {
    let n = a.dim();
    let mut count = vec![0usize; n + 1];
    for &j in a.pattern().col_idx() {
        count[j + 1] += 1;
    }
    for j in 0..n {
        count[j + 1] += count[j];
    }
    let col_ptr = count.clone();
    let mut next = count;
    let nnz = a.pattern().nnz();
    let mut row_idx = vec![0; nnz];
    let mut values = vec![0.0; nnz];
    for i in 0..n {
        for (j, v) in a.row(i) {
            let k = next[j];
            row_idx[k] = i;
            values[k] = v * row_scale[i];
            next[j] += 1;
        }
    }
    Csc { col_ptr, row_idx, values }
}

fn amd_order(a: &SparseMatrix) -> Vec<usize> {
    let n = a.dim();
    let p = a.pattern();
    match amd::order(n, p.row_ptr(), p.col_idx(), &amd::Control::default()) {
        Ok((perm, _, _)) => perm,
        Err(_) => (0..n).collect(),
    }
}

impl Factorization {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        Self::with_threshold(a, DEFAULT_PIVOT_THRESHOLD)
    }

    /// Factorization with diagonal pivot threshold `tol` in `(0, 1]`.
    pub fn with_threshold(a: &SparseMatrix, tol: f64) -> Result<Self> {
        if !(tol > 0.0 && tol <= 1.0) {
            return Err(Error::Domain(format!("pivot threshold {tol} outside (0, 1]")));
        }
        let n = a.dim();
        let row_scale: Vec<f64> = (0..n)
            .map(|i| {
                let s: f64 = a.row(i).map(|(_, v)| v.abs()).sum();
                if s > 0.0 && s.is_finite() { 1.0 / s } else { 1.0 }
            })
            .collect();
        let col_order = amd_order(a);
        let csc = to_csc(a, &row_scale);
        let a_max = csc.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));

        let mut lower = Csc { col_ptr: Vec::with_capacity(n + 1), ..Default::default() };
        let mut upper = Csc { col_ptr: Vec::with_capacity(n + 1), ..Default::default() };
        const UNSET: usize = usize::MAX;
        let mut pinv = vec![UNSET; n];
        let mut x = vec![0.0; n];
        let mut reach = Reach::new(n);
        let mut u_max = 0.0f64;

        for (k, &col) in col_order.iter().enumerate() {
            lower.col_ptr.push(lower.row_idx.len());
            upper.col_ptr.push(upper.row_idx.len());

            // x = L \ A(:, col), sparse
            let rows = &csc.row_idx[csc.col_ptr[col]..csc.col_ptr[col + 1]];
            let top = reach.compute(&lower, rows, &pinv);
            for &i in &reach.stack[top..] {
                x[i] = 0.0;
            }
            let mut col_max = 0.0f64;
            for p in csc.col_ptr[col]..csc.col_ptr[col + 1] {
                x[csc.row_idx[p]] = csc.values[p];
                col_max = col_max.max(csc.values[p].abs());
            }
            for &j in &reach.stack[top..] {
                let jcol = pinv[j];
                if jcol == UNSET {
                    continue;
                }
                let xj = x[j];
                for p in lower.col_ptr[jcol] + 1..lower.col_ptr.get(jcol + 1).copied().unwrap_or(lower.row_idx.len()) {
                    x[lower.row_idx[p]] -= lower.values[p] * xj;
                }
            }

            let mut best = UNSET;
            let mut best_abs = -1.0;
            for &i in &reach.stack[top..] {
                if pinv[i] == UNSET {
                    if x[i].abs() > best_abs {
                        best_abs = x[i].abs();
                        best = i;
                    }
                } else {
                    upper.row_idx.push(pinv[i]);
                    upper.values.push(x[i]);
                    u_max = u_max.max(x[i].abs());
                }
            }
            let tiny = f64::EPSILON * col_max.max(a_max) * n as f64;
            if best == UNSET || !(best_abs > tiny) || !best_abs.is_finite() {
                return Err(Error::Singular { pivot: k });
            }
            if pinv[col] == UNSET && x[col].abs() >= tol * best_abs {
                best = col;
            }
            let pivot = x[best];
            upper.row_idx.push(k);
            upper.values.push(pivot);
            u_max = u_max.max(pivot.abs());
            pinv[best] = k;
            lower.row_idx.push(best);
            lower.values.push(1.0);
            for &i in &reach.stack[top..] {
                if pinv[i] == UNSET {
                    lower.row_idx.push(i);
                    lower.values.push(x[i] / pivot);
                }
                x[i] = 0.0;
            }
        }
        lower.col_ptr.push(lower.row_idx.len());
        upper.col_ptr.push(upper.row_idx.len());
        for r in &mut lower.row_idx {
            *r = pinv[*r];
        }

        Ok(Self {
            n,
            lower,
            upper,
            row_perm: pinv,
            col_order,
            row_scale,
            pivot_growth: if a_max > 0.0 { u_max / a_max } else { 0.0 },
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `max |U| / max |R A|`.
    pub fn pivot_growth(&self) -> f64 {
        self.pivot_growth
    }

    pub fn fill(&self) -> usize {
        self.lower.row_idx.len() + self.upper.row_idx.len()
    }

    fn check(&self, b: &[f64]) -> Result<()> {
        if b.len() != self.n {
            return Err(Error::Dimension { expected: self.n, found: b.len() });
        }
        Ok(())
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check(b)?;
        let mut y = vec![0.0; self.n];
        for (i, &bi) in b.iter().enumerate() {
            y[self.row_perm[i]] = bi * self.row_scale[i];
        }
        let (l, u) = (&self.lower, &self.upper);
        for j in 0..self.n {
            let yj = y[j];
            for p in l.col_ptr[j] + 1..l.col_ptr[j + 1] {
                y[l.row_idx[p]] -= l.values[p] * yj;
            }
        }
        for j in (0..self.n).rev() {
            let last = u.col_ptr[j + 1] - 1;
            y[j] /= u.values[last];
            let yj = y[j];
            for p in u.col_ptr[j]..last {
                y[u.row_idx[p]] -= u.values[p] * yj;
            }
        }
        let mut x = vec![0.0; self.n];
        for (k, &c) in self.col_order.iter().enumerate() {
            x[c] = y[k];
        }
        Ok(x)
    }

    /// Solves `Aᵀ x = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check(b)?;
        let mut y: Vec<f64> = self.col_order.iter().map(|&c| b[c]).collect();
        let (l, u) = (&self.lower, &self.upper);
        for j in 0..self.n {
            let last = u.col_ptr[j + 1] - 1;
            let mut s = y[j];
            for p in u.col_ptr[j]..last {
                s -= u.values[p] * y[u.row_idx[p]];
            }
            y[j] = s / u.values[last];
        }
        for j in (0..self.n).rev() {
            let mut s = y[j];
            for p in l.col_ptr[j] + 1..l.col_ptr[j + 1] {
                s -= l.values[p] * y[l.row_idx[p]];
            }
            y[j] = s;
        }
        Ok((0..self.n).map(|i| y[self.row_perm[i]] * self.row_scale[i]).collect())
    }
}

/// Depth-first reachability in the graph of the partial `L`, producing the
/// nonzero pattern of `L \ b` in topological order in `stack[top..]`.
struct Reach {
    stack: Vec<usize>,
    marked: Vec<bool>,
    dfs: Vec<(usize, usize)>,
}

impl Reach {
    fn new(n: usize) -> Self {
        Self { stack: vec![0; n], marked: vec![false; n], dfs: Vec::new() }
    }

    fn compute(&mut self, lower: &Csc, rows: &[usize], pinv: &[usize]) -> usize {
        let n = self.stack.len();
        let mut top = n;
        let done = lower.row_idx.len();
        let col_end = |c: usize| lower.col_ptr.get(c + 1).copied().unwrap_or(done);
        for &start in rows {
            if self.marked[start] {
                continue;
            }
            self.marked[start] = true;
            let first = match pinv[start] {
                usize::MAX => None,
                c => Some(lower.col_ptr[c] + 1),
            };
            self.dfs.push((start, first.unwrap_or(0)));
            if first.is_none() {
                self.dfs.pop();
                top -= 1;
                self.stack[top] = start;
                continue;
            }
            while let Some(&mut (node, ref mut p)) = self.dfs.last_mut() {
                let c = pinv[node];
                let end = col_end(c);
                let mut pushed = None;
                while *p < end {
                    let child = lower.row_idx[*p];
                    *p += 1;
                    if !self.marked[child] {
                        self.marked[child] = true;
                        pushed = Some(child);
                        break;
                    }
                }
                match pushed {
                    Some(child) if pinv[child] != usize::MAX => {
                        self.dfs.push((child, lower.col_ptr[pinv[child]] + 1));
                    }
                    Some(child) => {
                        top -= 1;
                        self.stack[top] = child;
                    }
                    None => {
                        self.dfs.pop();
                        top -= 1;
                        self.stack[top] = node;
                    }
                }
            }
        }
        for &i in &self.stack[top..] {
            self.marked[i] = false;
        }
        top
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Dense Gaussian elimination with partial pivoting.
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        x
    }

    fn random_sparse(n: usize, density: f64, shift: f64, seed: u64) -> SparseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut d = vec![vec![0.0; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                if i == j {
                    *v = shift + rng.random::<f64>();
                } else if rng.random::<f64>() < density {
                    *v = rng.random::<f64>() * 2.0 - 1.0;
                }
            }
        }
        SparseMatrix::from_dense(&d).unwrap()
    }

    #[test]
    fn identity_factors_trivially() {
        let f = Factorization::new(&SparseMatrix::identity(5)).unwrap();
        assert_eq!(f.fill(), 10);
        let b = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(f.solve(&b).unwrap(), b.to_vec());
    }

    #[test]
    fn permutation_requires_pivoting() {
        let a = SparseMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let f = Factorization::new(&a).unwrap();
        assert_eq!(f.solve(&[3.0, 7.0]).unwrap(), vec![7.0, 3.0]);
        assert_eq!(f.solve_transpose(&[3.0, 7.0]).unwrap(), vec![7.0, 3.0]);
    }

    #[test]
    fn zero_rhs_gives_zero_and_diag_scales() {
        let a = SparseMatrix::from_triplets(4, &(0..4).map(|i| (i, i, 2.0)).collect::<Vec<_>>()).unwrap();
        let f = Factorization::new(&a).unwrap();
        assert_eq!(f.solve(&[0.0; 4]).unwrap(), vec![0.0; 4]);
        assert_eq!(f.solve(&[1.0; 4]).unwrap(), vec![0.5; 4]);
    }

    #[test]
    fn singular_matrix_reports_pivot() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(Factorization::new(&a), Err(Error::Singular { pivot: 1 })));
        let b = SparseMatrix::from_triplets(3, &[(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        assert!(matches!(Factorization::new(&b), Err(Error::Singular { .. })));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let f = Factorization::new(&SparseMatrix::identity(3)).unwrap();
        assert!(matches!(f.solve(&[1.0]), Err(Error::Dimension { expected: 3, found: 1 })));
    }

    #[test]
    fn matches_dense_oracle_on_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for seed in 0..8 {
            let n = 20 + 10 * seed as usize;
            let a = random_sparse(n, 0.08, 0.5, seed);
            let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            let f = Factorization::new(&a).unwrap();
            let x = f.solve(&b).unwrap();
            let x_ref = dense_solve(a.to_dense(), b.clone());
            let err: f64 = x.iter().zip(&x_ref).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            let nrm: f64 = x_ref.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(err / nrm < 1e-10, "seed {seed}: rel err {}", err / nrm);

            let xt = f.solve_transpose(&b).unwrap();
            let at = {
                let d = a.to_dense();
                (0..n).map(|i| (0..n).map(|j| d[j][i]).collect()).collect()
            };
            let xt_ref = dense_solve(at, b.clone());
            let err: f64 = xt.iter().zip(&xt_ref).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            let nrm: f64 = xt_ref.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(err / nrm < 1e-10);
        }
    }

    #[test]
    fn factorization_is_deterministic() {
        let a = random_sparse(60, 0.1, 0.2, 3);
        let b: Vec<f64> = (0..60).map(|i| (i as f64).sin()).collect();
        let x1 = Factorization::new(&a).unwrap().solve(&b).unwrap();
        let x2 = Factorization::new(&a).unwrap().solve(&b).unwrap();
        assert_eq!(x1, x2);
    }
}
