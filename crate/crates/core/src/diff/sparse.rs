use std::sync::Arc;

use super::{DiffError, Matrix};
use crate::Scalar;

#[derive(Debug)]
struct Csr<T> {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> Csr<T> {
    fn from_sorted(rows: usize, cols: usize, mut entries: Vec<(usize, usize, T)>) -> Self {
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0; rows + 1];
        for &(r, _, _) in &entries {
            indptr[r + 1] += 1;
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Self {
            rows,
            cols,
            indptr,
            indices: entries.iter().map(|e| e.1).collect(),
            values: entries.iter().map(|e| e.2).collect(),
        }
    }

    fn mul_dense(&self, x: &Matrix<T>) -> Matrix<T> {
        let width = x.cols();
        let mut out = Matrix::zeros(self.rows, width);
        for r in 0..self.rows {
            let dst = out.row_mut(r);
            for k in self.indptr[r]..self.indptr[r + 1] {
                let w = self.values[k];
                for (o, &v) in dst.iter_mut().zip(x.row(self.indices[k])) {
                    *o += w * v;
                }
            }
        }
        out
    }
}

/// Immutable sparse matrix that keeps both orientations, so products with
/// its transpose (needed by the backward pass) cost the same as forward ones.
///
/// Row sums are accumulated in ascending column order.
#[derive(Debug)]
pub struct SparseMatrix<T> {
    fwd: Arc<Csr<T>>,
    bwd: Arc<Csr<T>>,
}

impl<T> Clone for SparseMatrix<T> {
    fn clone(&self) -> Self {
        Self {
            fwd: Arc::clone(&self.fwd),
            bwd: Arc::clone(&self.bwd),
        }
    }
}

impl<T: Scalar> SparseMatrix<T> {
    /// Builds from `(row, col, value)` triplets. Duplicate coordinates are kept
    /// as separate terms.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, T)>,
    ) -> Result<Self, DiffError> {
        let entries: Vec<_> = triplets.into_iter().collect();
        for &(r, c, _) in &entries {
            if r >= rows || c >= cols {
                return Err(DiffError::IndexOutOfRange {
                    index: if r >= rows { r } else { c },
                    len: if r >= rows { rows } else { cols },
                });
            }
        }
        let transposed = entries.iter().map(|&(r, c, v)| (c, r, v)).collect();
        Ok(Self {
            fwd: Arc::new(Csr::from_sorted(rows, cols, entries)),
            bwd: Arc::new(Csr::from_sorted(cols, rows, transposed)),
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.fwd.rows, self.fwd.cols)
    }

    pub fn nnz(&self) -> usize {
        self.fwd.values.len()
    }

    /// Shares storage with `self`.
    pub fn transpose(&self) -> Self {
        Self {
            fwd: Arc::clone(&self.bwd),
            bwd: Arc::clone(&self.fwd),
        }
    }

    pub fn mul_dense(&self, x: &Matrix<T>) -> Result<Matrix<T>, DiffError> {
        if x.rows() != self.fwd.cols {
            return Err(DiffError::ShapeMismatch {
                op: "spmm",
                left: self.shape(),
                right: x.shape(),
            });
        }
        Ok(self.fwd.mul_dense(x))
    }

    pub(crate) fn transpose_mul_dense(&self, x: &Matrix<T>) -> Matrix<T> {
        self.bwd.mul_dense(x)
    }

    pub fn to_dense(&self) -> Matrix<T> {
        let mut out = Matrix::zeros(self.fwd.rows, self.fwd.cols);
        for r in 0..self.fwd.rows {
            for k in self.fwd.indptr[r]..self.fwd.indptr[r + 1] {
                let c = self.fwd.indices[k];
                let v = out.get(r, c) + self.fwd.values[k];
                out.set(r, c, v);
            }
        }
        out
    }
}
