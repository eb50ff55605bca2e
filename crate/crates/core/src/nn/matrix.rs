use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ensure_dim, Error, Result};

/// Dense row-major matrix of `f64`.
///
/// Rows are batch items throughout the crate: a batch of `n` feature
/// vectors of width `d` is an `n x d` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        ensure_dim("matrix data length", rows * cols, data.len())?;
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            ensure_dim("row width", cols, row.as_ref().len())?;
            data.extend_from_slice(row.as_ref());
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        ensure_dim("matmul inner dimension", self.cols, rhs.rows)?;
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self^T * rhs`.
    pub fn t_matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        ensure_dim("t_matmul shared rows", self.rows, rhs.rows)?;
        let mut out = Matrix::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            let rhs_row = rhs.row(k);
            for (i, &a) in self.row(k).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * rhs^T`.
    pub fn matmul_t(&self, rhs: &Matrix) -> Result<Matrix> {
        ensure_dim("matmul_t shared cols", self.cols, rhs.cols)?;
        let mut out = Matrix::zeros(self.rows, rhs.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..rhs.rows {
                out.data[i * rhs.rows + j] = dot(a, rhs.row(j));
            }
        }
        Ok(out)
    }

    pub fn add_assign(&mut self, other: &Matrix) -> Result<()> {
        ensure_dim("add rows", self.rows, other.rows)?;
        ensure_dim("add cols", self.cols, other.cols)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    pub fn fill(&mut self, value: f64) {
        for v in &mut self.data {
            *v = value;
        }
    }

    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Squared Frobenius norm.
    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Subtracts each column's mean in place.
    pub fn center_columns(&mut self) {
        if self.rows == 0 {
            return;
        }
        let n = self.rows as f64;
        for c in 0..self.cols {
            let mean = (0..self.rows).map(|r| self.get(r, c)).sum::<f64>() / n;
            for r in 0..self.rows {
                self.data[r * self.cols + c] -= mean;
            }
        }
    }

    pub fn vstack(parts: &[&Matrix]) -> Result<Matrix> {
        let cols = parts.first().map_or(0, |m| m.cols);
        let mut data = Vec::new();
        let mut rows = 0;
        for m in parts {
            ensure_dim("vstack cols", cols, m.cols)?;
            data.extend_from_slice(&m.data);
            rows += m.rows;
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Rows `start..end` as a new matrix.
    pub fn row_range(&self, start: usize, end: usize) -> Matrix {
        Matrix {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Column concatenation `[a | b]`.
pub fn concat_cols(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    ensure_dim("concat rows", a.rows, b.rows)?;
    let cols = a.cols + b.cols;
    let mut data = Vec::with_capacity(a.rows * cols);
    for r in 0..a.rows {
        data.extend_from_slice(a.row(r));
        data.extend_from_slice(b.row(r));
    }
    Ok(Matrix {
        rows: a.rows,
        cols,
        data,
    })
}

/// Inverse of [`concat_cols`]: columns `[0, at)` and `[at, cols)`.
///
/// Also routes an upstream gradient of the concatenation back to its two
/// operands.
pub fn split_cols(h: &Matrix, at: usize) -> Result<(Matrix, Matrix)> {
    if at > h.cols {
        return Err(Error::Shape {
            what: "split point",
            expected: h.cols,
            found: at,
        });
    }
    let right = h.cols - at;
    let mut a = Vec::with_capacity(h.rows * at);
    let mut b = Vec::with_capacity(h.rows * right);
    for r in 0..h.rows {
        let row = h.row(r);
        a.extend_from_slice(&row[..at]);
        b.extend_from_slice(&row[at..]);
    }
    Ok((
        Matrix {
            rows: h.rows,
            cols: at,
            data: a,
        },
        Matrix {
            rows: h.rows,
            cols: right,
            data: b,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_agree_with_transposed_forms() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        let b = Matrix::from_rows(&[[1.0, -1.0, 0.5], [2.0, 0.0, 1.0]]).unwrap();
        let ab = a.matmul(&b).unwrap();
        assert_eq!(ab.row(0), &[5.0, -1.0, 2.5]);
        assert_eq!(ab.row(2), &[17.0, -5.0, 8.5]);
        let ata = a.t_matmul(&a).unwrap();
        assert_eq!(ata.data(), &[35.0, 44.0, 44.0, 56.0]);
        let aat = a.matmul_t(&a).unwrap();
        assert_eq!(aat.get(0, 1), 11.0);
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn split_inverts_concat_bitwise() {
        let a = Matrix::from_rows(&[[0.1, 0.2], [0.3, 0.4]]).unwrap();
        let b = Matrix::from_rows(&[[1e-300], [-7.25]]).unwrap();
        let h = concat_cols(&a, &b).unwrap();
        assert_eq!(h.cols(), 3);
        let (a2, b2) = split_cols(&h, a.cols()).unwrap();
        assert_eq!(a2, a);
        assert_eq!(b2, b);
        assert!(concat_cols(&a, &Matrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn concat_of_two_halves_restores_full_width() {
        let h = concat_cols(&Matrix::zeros(2, 384), &Matrix::zeros(2, 384)).unwrap();
        assert_eq!(h.cols(), 768);
    }

    #[test]
    fn centering_zeroes_column_means() {
        let mut m = Matrix::from_rows(&[[1.0, 10.0], [3.0, 20.0]]).unwrap();
        m.center_columns();
        assert_eq!(m.data(), &[-1.0, -5.0, 1.0, 5.0]);
    }
}
