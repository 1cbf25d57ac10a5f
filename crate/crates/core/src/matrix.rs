//! Small dense row-major matrices and affine maps.
//!
//! Layer matrices here are at most a few thousand on a side. Structured
//! matrices (unrolled convolutions) keep a row-wise non-zero index so that
//! matrix-vector products skip the zero pattern.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{all_finite, Scalar};

const SPARSE_MIN_ENTRIES: usize = 256;
const SPARSE_MAX_DENSITY: f64 = 0.25;

#[derive(Debug)]
struct RowIndex {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
    // Superset of the non-zero pattern of `data`.
    index: Option<Arc<RowIndex>>,
}

impl<T: PartialEq> PartialEq for Matrix<T> {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.data == other.data
    }
}

impl<T: Scalar> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "matrix must have positive dimensions, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::dims(
                format!("matrix data for {rows}x{cols}"),
                rows * cols,
                data.len(),
            ));
        }
        let mut m = Matrix {
            rows,
            cols,
            data,
            index: None,
        };
        m.reindex();
        Ok(m)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
            index: None,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { T::one() } else { T::zero() })
    }

    pub fn diag(values: &[T]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |r, c| if r == c { values[r] } else { T::zero() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        let mut m = Matrix {
            rows,
            cols,
            data,
            index: None,
        };
        m.reindex();
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
            return Err(Error::dims(format!("matrix row {i}"), cols, r.len()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// Builds from `f64` rows; convenient for literals and file input.
    pub fn from_f64_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let converted: Vec<Vec<T>> = rows
            .iter()
            .map(|r| r.iter().map(|&v| T::lit(v)).collect())
            .collect();
        Self::from_rows(&converted)
    }

    fn reindex(&mut self) {
        let total = self.rows * self.cols;
        self.index = None;
        if total < SPARSE_MIN_ENTRIES {
            return;
        }
        let nnz = self.data.iter().filter(|v| !v.is_zero()).count();
        if (nnz as f64) > SPARSE_MAX_DENSITY * total as f64 {
            return;
        }
        let mut row_ptr = Vec::with_capacity(self.rows + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if !self.data[r * self.cols + c].is_zero() {
                    col_idx.push(c);
                }
            }
            row_ptr.push(col_idx.len());
        }
        self.index = Some(Arc::new(RowIndex { row_ptr, col_idx }));
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.data)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| v.is_zero())
    }

    /// `out = self * x`
    pub fn mul_vec_into(&self, x: &[T], out: &mut Vec<T>) {
        debug_assert_eq!(x.len(), self.cols);
        out.clear();
        out.reserve(self.rows);
        match &self.index {
            Some(idx) => {
                for r in 0..self.rows {
                    let base = r * self.cols;
                    let mut acc = T::zero();
                    for &c in &idx.col_idx[idx.row_ptr[r]..idx.row_ptr[r + 1]] {
                        acc = acc + self.data[base + c] * x[c];
                    }
                    out.push(acc);
                }
            }
            None => {
                for r in 0..self.rows {
                    let acc = self
                        .row(r)
                        .iter()
                        .zip(x)
                        .fold(T::zero(), |acc, (&w, &v)| acc + w * v);
                    out.push(acc);
                }
            }
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut out = Vec::new();
        self.mul_vec_into(x, &mut out);
        out
    }

    /// `selfᵀ * y`
    pub fn tr_mul_vec(&self, y: &[T]) -> Vec<T> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (r, &yr) in y.iter().enumerate() {
            if yr.is_zero() {
                continue;
            }
            if let Some(idx) = &self.index {
                let base = r * self.cols;
                for &c in &idx.col_idx[idx.row_ptr[r]..idx.row_ptr[r + 1]] {
                    out[c] = out[c] + self.data[base + c] * yr;
                }
                continue;
            }
            for (o, &w) in out.iter_mut().zip(self.row(r)) {
                *o = *o + w * yr;
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &Matrix<T>) -> Result<Matrix<T>> {
        if self.cols != rhs.rows {
            return Err(Error::dims("matrix product inner dimension", self.cols, rhs.rows));
        }
        let mut data = vec![T::zero(); self.rows * rhs.cols];
        for r in 0..self.rows {
            let out = &mut data[r * rhs.cols..(r + 1) * rhs.cols];
            for (k, &a) in self.row(r).iter().enumerate() {
                if a.is_zero() {
                    continue;
                }
                for (o, &b) in out.iter_mut().zip(rhs.row(k)) {
                    *o = *o + a * b;
                }
            }
        }
        Matrix::new(self.rows, rhs.cols, data)
    }

    pub fn transpose(&self) -> Matrix<T> {
        Matrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, factor: T) -> Matrix<T> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * factor).collect(),
            index: self.index.clone(),
        }
    }

    pub fn add(&self, rhs: &Matrix<T>) -> Result<Matrix<T>> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::dims("matrix sum row count", self.rows, rhs.rows));
        }
        let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect();
        Matrix::new(self.rows, self.cols, data)
    }

    pub fn sub(&self, rhs: &Matrix<T>) -> Result<Matrix<T>> {
        self.add(&rhs.scaled(-T::one()))
    }

    /// Stacks blocks vertically; all blocks need the same column count.
    pub fn vstack(blocks: &[&Matrix<T>]) -> Result<Matrix<T>> {
        let cols = blocks
            .first()
            .map(|b| b.cols)
            .ok_or_else(|| Error::InvalidArgument("vstack of zero blocks".into()))?;
        let mut data = Vec::new();
        let mut rows = 0;
        for b in blocks {
            if b.cols != cols {
                return Err(Error::dims("vstack column count", cols, b.cols));
            }
            data.extend_from_slice(&b.data);
            rows += b.rows;
        }
        Matrix::new(rows, cols, data)
    }

    /// Places blocks side by side; all blocks need the same row count.
    pub fn hstack(blocks: &[&Matrix<T>]) -> Result<Matrix<T>> {
        let rows = blocks
            .first()
            .map(|b| b.rows)
            .ok_or_else(|| Error::InvalidArgument("hstack of zero blocks".into()))?;
        if let Some(b) = blocks.iter().find(|b| b.rows != rows) {
            return Err(Error::dims("hstack row count", rows, b.rows));
        }
        let cols: usize = blocks.iter().map(|b| b.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for b in blocks {
                data.extend_from_slice(b.row(r));
            }
        }
        Matrix::new(rows, cols, data)
    }

    pub fn block_diag(blocks: &[&Matrix<T>]) -> Result<Matrix<T>> {
        if blocks.is_empty() {
            return Err(Error::InvalidArgument("block_diag of zero blocks".into()));
        }
        let rows: usize = blocks.iter().map(|b| b.rows).sum();
        let cols: usize = blocks.iter().map(|b| b.cols).sum();
        let mut out = vec![T::zero(); rows * cols];
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            for r in 0..b.rows {
                let dst = (r0 + r) * cols + c0;
                out[dst..dst + b.cols].copy_from_slice(b.row(r));
            }
            r0 += b.rows;
            c0 += b.cols;
        }
        Matrix::new(rows, cols, out)
    }

    /// `[I I … I]` with `copies` identity blocks of size `n`.
    pub fn repeated_identity(n: usize, copies: usize) -> Matrix<T> {
        Matrix::from_fn(n, n * copies, |r, c| {
            if c % n == r {
                T::one()
            } else {
                T::zero()
            }
        })
    }

    pub fn cast<U: Scalar>(&self) -> Matrix<U> {
        let mut m = Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
            index: None,
        };
        m.reindex();
        m
    }
}

/// `x ↦ W x + b`
#[derive(Clone, Debug, PartialEq)]
pub struct Affine<T> {
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Affine<T> {
    pub fn new(weight: Matrix<T>, bias: Vec<T>) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::dims("affine bias length", weight.rows(), bias.len()));
        }
        Ok(Affine { weight, bias })
    }

    pub fn linear(weight: Matrix<T>) -> Self {
        let bias = vec![T::zero(); weight.rows()];
        Affine { weight, bias }
    }

    pub fn identity(n: usize) -> Self {
        Self::linear(Matrix::identity(n))
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn apply_into(&self, x: &[T], out: &mut Vec<T>) {
        self.weight.mul_vec_into(x, out);
        for (o, &b) in out.iter_mut().zip(&self.bias) {
            *o = *o + b;
        }
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let mut out = Vec::new();
        self.apply_into(x, &mut out);
        out
    }

    /// `self ∘ inner`
    pub fn compose(&self, inner: &Affine<T>) -> Result<Affine<T>> {
        let weight = self.weight.matmul(&inner.weight)?;
        let mut bias = self.weight.mul_vec(&inner.bias);
        for (o, &b) in bias.iter_mut().zip(&self.bias) {
            *o = *o + b;
        }
        Affine::new(weight, bias)
    }

    pub fn is_finite(&self) -> bool {
        self.weight.is_finite() && all_finite(&self.bias)
    }

    pub fn cast<U: Scalar>(&self) -> Affine<U> {
        Affine {
            weight: self.weight.cast(),
            bias: self.bias.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_and_stacks() {
        let a = Matrix::<f64>::from_f64_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::<f64>::from_f64_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let ab = a.matmul(&b).unwrap();
        assert_eq!(ab.to_rows(), vec![vec![2.0, 1.0], vec![4.0, 3.0]]);
        assert_eq!(a.mul_vec(&[1.0, 1.0]), vec![3.0, 7.0]);
        assert_eq!(a.tr_mul_vec(&[1.0, 1.0]), vec![4.0, 6.0]);
        let h = Matrix::hstack(&[&a, &b]).unwrap();
        assert_eq!((h.rows(), h.cols()), (2, 4));
        let v = Matrix::vstack(&[&a, &b]).unwrap();
        assert_eq!((v.rows(), v.cols()), (4, 2));
        let d = Matrix::block_diag(&[&a, &b]).unwrap();
        assert_eq!(d.get(2, 3), 1.0);
        assert_eq!(d.get(0, 2), 0.0);
        let l = Matrix::<f64>::repeated_identity(2, 2);
        assert_eq!(l.to_rows(), vec![vec![1.0, 0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0, 1.0]]);
    }

    #[test]
    fn sparse_index_matches_dense_product() {
        let m = Matrix::<f64>::from_fn(40, 30, |r, c| if (r + 2 * c) % 7 == 0 { (r as f64) - c as f64 } else { 0.0 });
        assert!(m.index.is_some());
        let x: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let dense: Vec<f64> = (0..40)
            .map(|r| m.row(r).iter().zip(&x).map(|(a, b)| a * b).sum())
            .collect();
        assert_eq!(m.mul_vec(&x), dense);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Matrix::<f64>::new(2, 2, vec![1.0; 3]).is_err());
        assert!(Matrix::<f64>::from_f64_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(Affine::new(Matrix::<f64>::identity(2), vec![0.0; 3]).is_err());
    }
}
