//! Compressed sparse row matrices over `C64`, used for assembled operators.

use alloc::vec;
use alloc::vec::Vec;

use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists; duplicate columns are summed.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, C64)>>) -> Self {
        let n_rows = rows.len();
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let start = cols.len();
            for (c, v) in row {
                debug_assert!(c < n_cols);
                if cols.len() > start && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix { n_rows, n_cols, row_ptr, cols, vals }
    }

    pub fn from_dense_rows(n_cols: usize, rows: Vec<Vec<C64>>) -> Self {
        let rows = rows
            .into_iter()
            .map(|r| r.into_iter().enumerate().filter(|(_, v)| *v != C64::new(0.0, 0.0)).collect())
            .collect();
        Self::from_rows(n_cols, rows)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows)
            .map(|i| self.row(i).fold(C64::new(0.0, 0.0), |acc, (c, v)| acc + v * x[c]))
            .collect()
    }

    /// `y = Aᵀ x` (plain transpose, no conjugation): the action on covectors.
    pub fn apply_transpose(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.n_rows);
        let mut y = vec![C64::new(0.0, 0.0); self.n_cols];
        for (i, xi) in x.iter().enumerate() {
            for (c, v) in self.row(i) {
                y[c] += v * xi;
            }
        }
        y
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<C64> {
        let mut d = vec![C64::new(0.0, 0.0); self.n_rows * self.n_cols];
        for i in 0..self.n_rows {
            for (c, v) in self.row(i) {
                d[i * self.n_cols + c] += v;
            }
        }
        d
    }

    /// Largest absolute row sum, the sup-norm operator norm.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n_rows)
            .map(|i| self.row(i).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transpose_matches_dense() {
        let m = CsrMatrix::from_rows(
            3,
            vec![
                vec![(0, C64::new(1.0, 0.0)), (2, C64::new(0.0, 2.0))],
                vec![(1, C64::new(3.0, 0.0)), (1, C64::new(1.0, 0.0))],
            ],
        );
        assert_eq!(m.nnz(), 3);
        let x = [C64::new(1.0, 1.0), C64::new(2.0, 0.0)];
        let y = m.apply_transpose(&x);
        let d = m.to_dense();
        for c in 0..3 {
            let want = d[c] * x[0] + d[3 + c] * x[1];
            assert!((y[c] - want).norm() < 1e-15);
        }
        assert_eq!(m.norm_inf(), 4.0);
    }
}
