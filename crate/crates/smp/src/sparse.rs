//! CSR sparse matrix for adjacency operators.
//!
//! Propagation never materializes matrix powers: `A^K X` is K successive
//! sparse-dense products. Accumulation order is row-major with ascending
//! column indices, so repeated runs produce bit-identical results.

use crate::dense::DenseMatrix;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix<T> {
    pub rows: usize,
    pub cols: usize,
    /// Row i spans `col_idx[row_ptr[i]..row_ptr[i + 1]]`.
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<T>,
}

impl<T: Scalar> SparseMatrix<T> {
    /// Builds from (row, col, value) entries; duplicates are a caller bug.
    pub fn from_entries(rows: usize, cols: usize, entries: &[(usize, usize, T)]) -> Self {
        let mut sorted: Vec<(usize, usize, T)> = entries.to_vec();
        sorted.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &sorted {
            assert!(r < rows && c < cols, "entry ({r}, {c}) out of {rows}x{cols}");
            assert!(last != Some((r, c)), "duplicate entry at ({r}, {c})");
            last = Some((r, c));
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(pos) => vals[pos],
            Err(_) => T::zero(),
        }
    }

    /// self (m x n) * x (n x c), deterministic accumulation order.
    pub fn spmm(&self, x: &DenseMatrix<T>) -> DenseMatrix<T> {
        assert_eq!(
            self.cols, x.rows,
            "spmm shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, x.rows, x.cols
        );
        let mut out = DenseMatrix::zeros(self.rows, x.cols);
        for i in 0..self.rows {
            let (cols, vals) = (
                &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]],
                &self.values[self.row_ptr[i]..self.row_ptr[i + 1]],
            );
            let out_row = &mut out.data[i * x.cols..(i + 1) * x.cols];
            for (&j, &v) in cols.iter().zip(vals) {
                let x_row = &x.data[j * x.cols..(j + 1) * x.cols];
                for (o, &xv) in out_row.iter_mut().zip(x_row) {
                    *o += v * xv;
                }
            }
        }
        out
    }

    /// self^K * x via K successive products.
    pub fn propagate(&self, x: &DenseMatrix<T>, k: usize) -> DenseMatrix<T> {
        assert_eq!(self.rows, self.cols, "propagate needs a square operator");
        let mut cur = x.clone();
        for _ in 0..k {
            cur = self.spmm(&cur);
        }
        cur
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out.set(i, j, v);
            }
        }
        out
    }

    /// Largest |a_ij - a_ji|; 0 for exactly symmetric matrices.
    pub fn max_asymmetry(&self) -> f64 {
        assert_eq!(self.rows, self.cols, "symmetry check needs a square matrix");
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let d = (v - self.get(j, i)).abs().as_f64();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn cast<U: Scalar>(&self) -> SparseMatrix<U> {
        SparseMatrix {
            rows: self.rows,
            cols: self.cols,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self.values.iter().map(|&v| U::from_f64(v.as_f64())).collect(),
        }
    }
}
