//! Row-major dense matrix used for features, stochastic signals, model
//! parameters and representations.

use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix<T> {
    pub rows: usize,
    pub cols: usize,
    /// Entry (i, j) lives at `data[i * cols + j]`.
    pub data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "dense data length {} does not match {}x{}",
            data.len(),
            rows,
            cols
        );
        DenseMatrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows in dense matrix literal");
            data.extend_from_slice(r);
        }
        DenseMatrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// self (m x k) * other (k x n).
    pub fn matmul(&self, other: &DenseMatrix<T>) -> DenseMatrix<T> {
        assert_eq!(
            self.cols, other.rows,
            "matmul shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Self::zeros(self.rows, other.cols);
        unsafe {
            T::gemm(
                self.rows,
                self.cols,
                other.cols,
                T::one(),
                self.data.as_ptr(),
                self.cols as isize,
                1,
                other.data.as_ptr(),
                other.cols as isize,
                1,
                T::zero(),
                out.data.as_mut_ptr(),
                other.cols as isize,
                1,
            );
        }
        out
    }

    /// self (m x k) * other^T, where other is n x k.
    pub fn matmul_nt(&self, other: &DenseMatrix<T>) -> DenseMatrix<T> {
        assert_eq!(
            self.cols, other.cols,
            "matmul_nt shape mismatch: {}x{} * ({}x{})^T",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Self::zeros(self.rows, other.rows);
        unsafe {
            T::gemm(
                self.rows,
                self.cols,
                other.rows,
                T::one(),
                self.data.as_ptr(),
                self.cols as isize,
                1,
                other.data.as_ptr(),
                1,
                other.cols as isize,
                T::zero(),
                out.data.as_mut_ptr(),
                other.rows as isize,
                1,
            );
        }
        out
    }

    /// self^T * other, where self is k x m and other is k x n.
    pub fn matmul_tn(&self, other: &DenseMatrix<T>) -> DenseMatrix<T> {
        assert_eq!(
            self.rows, other.rows,
            "matmul_tn shape mismatch: ({}x{})^T * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Self::zeros(self.cols, other.cols);
        unsafe {
            T::gemm(
                self.cols,
                self.rows,
                other.cols,
                T::one(),
                self.data.as_ptr(),
                1,
                self.cols as isize,
                other.data.as_ptr(),
                other.cols as isize,
                1,
                T::zero(),
                out.data.as_mut_ptr(),
                other.cols as isize,
                1,
            );
        }
        out
    }

    /// [a | b] column-wise.
    pub fn concat_cols(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> DenseMatrix<T> {
        assert_eq!(
            a.rows, b.rows,
            "concat_cols row mismatch: {} vs {}",
            a.rows, b.rows
        );
        let mut out = Self::zeros(a.rows, a.cols + b.cols);
        for i in 0..a.rows {
            out.row_mut(i)[..a.cols].copy_from_slice(a.row(i));
            out.row_mut(i)[a.cols..].copy_from_slice(b.row(i));
        }
        out
    }

    /// Columns `lo..hi` as a new matrix.
    pub fn slice_cols(&self, lo: usize, hi: usize) -> DenseMatrix<T> {
        assert!(lo <= hi && hi <= self.cols, "column slice out of range");
        let mut out = Self::zeros(self.rows, hi - lo);
        for i in 0..self.rows {
            out.row_mut(i).copy_from_slice(&self.row(i)[lo..hi]);
        }
        out
    }

    pub fn transpose(&self) -> DenseMatrix<T> {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.get(i, j);
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> DenseMatrix<T> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn relu(&self) -> DenseMatrix<T> {
        self.map(|x| if x > T::zero() { x } else { T::zero() })
    }

    /// Elementwise product of `grad` with the ReLU mask of `pre` (1 where
    /// pre > 0, else 0).
    pub fn relu_backward(pre: &DenseMatrix<T>, grad: &DenseMatrix<T>) -> DenseMatrix<T> {
        assert_eq!(pre.rows, grad.rows, "relu_backward row mismatch");
        assert_eq!(pre.cols, grad.cols, "relu_backward col mismatch");
        let data = pre
            .data
            .iter()
            .zip(&grad.data)
            .map(|(&p, &g)| if p > T::zero() { g } else { T::zero() })
            .collect();
        DenseMatrix {
            rows: pre.rows,
            cols: pre.cols,
            data,
        }
    }

    /// Adds `bias` (a 1 x cols matrix) to every row.
    pub fn add_row_broadcast(&mut self, bias: &DenseMatrix<T>) {
        assert_eq!(bias.rows, 1, "bias must be a single row");
        assert_eq!(bias.cols, self.cols, "bias width mismatch");
        for i in 0..self.rows {
            for (x, &b) in self.row_mut(i).iter_mut().zip(&bias.data) {
                *x += b;
            }
        }
    }

    /// Column sums as a 1 x cols matrix.
    pub fn col_sums(&self) -> DenseMatrix<T> {
        let mut out = Self::zeros(1, self.cols);
        for i in 0..self.rows {
            for (s, &x) in out.data.iter_mut().zip(self.row(i)) {
                *s += x;
            }
        }
        out
    }

    pub fn scale(&mut self, alpha: T) {
        for x in &mut self.data {
            *x *= alpha;
        }
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix<T>) -> f64 {
        assert_eq!(self.rows, other.rows, "max_abs_diff row mismatch");
        assert_eq!(self.cols, other.cols, "max_abs_diff col mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs().as_f64())
            .fold(0.0, f64::max)
    }

    pub fn row_l2_norm(&self, i: usize) -> f64 {
        self.row(i)
            .iter()
            .map(|&x| x.as_f64() * x.as_f64())
            .sum::<f64>()
            .sqrt()
    }

    /// L2 norm of the difference between row `i` of self and row `j` of other.
    pub fn row_diff_l2(&self, i: usize, other: &DenseMatrix<T>, j: usize) -> f64 {
        assert_eq!(self.cols, other.cols, "row_diff_l2 width mismatch");
        self.row(i)
            .iter()
            .zip(other.row(j))
            .map(|(&a, &b)| {
                let d = (a - b).as_f64();
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> DenseMatrix<U> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| U::from_f64(x.as_f64())).collect(),
        }
    }
}
