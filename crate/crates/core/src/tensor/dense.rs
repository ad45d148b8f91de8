use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows with an L2 norm below this are left untouched by [`row_normalize`].
pub const ROW_NORM_EPS: f64 = 1e-12;

/// Row-major dense `f64` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "from_vec",
                format!("{} values for {rows}x{cols}", data.len()),
            ));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("from_rows", "ragged rows"));
        }
        Ok(DenseMatrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
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
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn select_rows(&self, idx: &[usize]) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(idx.len(), self.cols);
        for (i, &r) in idx.iter().enumerate() {
            out.row_mut(i).copy_from_slice(self.row(r));
        }
        out
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scale(&mut self, k: f64) {
        self.data.iter_mut().for_each(|v| *v *= k);
    }

    pub fn scaled(&self, k: f64) -> DenseMatrix {
        let mut m = self.clone();
        m.scale(k);
        m
    }

    pub fn add_assign(&mut self, other: &DenseMatrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                "add_assign",
                format!("{:?} vs {:?}", self.shape(), other.shape()),
            ));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Largest absolute elementwise difference.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `self × other`.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        dense_matmul(self, other)
    }

    /// `self × otherᵀ`, i.e. every row of `self` dotted with every row of `other`.
    pub fn matmul_bt(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.cols {
            return Err(Error::shape(
                "matmul_bt",
                format!("{:?} x {:?}ᵀ", self.shape(), other.shape()),
            ));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            let o = &mut out.data[i * other.rows..(i + 1) * other.rows];
            for (j, slot) in o.iter_mut().enumerate() {
                *slot = dot(a, other.row(j));
            }
        }
        Ok(out)
    }

    /// `selfᵀ × other`.
    pub fn t_matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows {
            return Err(Error::shape(
                "t_matmul",
                format!("{:?}ᵀ x {:?}", self.shape(), other.shape()),
            ));
        }
        let mut out = DenseMatrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let a = self.row(k);
            let b = other.row(k);
            for (i, &aik) in a.iter().enumerate() {
                if aik == 0.0 {
                    continue;
                }
                axpy(aik, b, &mut out.data[i * other.cols..(i + 1) * other.cols]);
            }
        }
        Ok(out)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `row × m` for a single row vector.
pub fn vec_matmul(row: &[f64], m: &DenseMatrix) -> Vec<f64> {
    assert_eq!(row.len(), m.rows());
    let mut out = vec![0.0; m.cols()];
    for (k, &v) in row.iter().enumerate() {
        if v != 0.0 {
            axpy(v, m.row(k), &mut out);
        }
    }
    out
}

/// `row × mᵀ` for a single row vector.
pub fn vec_matmul_t(row: &[f64], m: &DenseMatrix) -> Vec<f64> {
    assert_eq!(row.len(), m.cols());
    (0..m.rows()).map(|i| dot(row, m.row(i))).collect()
}

pub fn dense_matmul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols != b.rows {
        return Err(Error::shape(
            "dense_matmul",
            format!("{}x{} times {}x{}", a.rows, a.cols, b.rows, b.cols),
        ));
    }
    let mut out = DenseMatrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let dst = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for (k, &aik) in a.row(i).iter().enumerate() {
            if aik != 0.0 {
                axpy(aik, b.row(k), dst);
            }
        }
    }
    Ok(out)
}

/// Row `i` of the result is `rows.row(i) × mats[i]` (the `bi,bij->bj` contraction).
pub fn batched_transform(rows: &DenseMatrix, mats: &[&DenseMatrix]) -> Result<DenseMatrix> {
    if mats.len() != rows.rows() {
        return Err(Error::shape(
            "batched_transform",
            format!("{} rows but {} matrices", rows.rows(), mats.len()),
        ));
    }
    let d = rows.cols();
    let out_cols = mats.first().map_or(d, |m| m.cols());
    let mut out = DenseMatrix::zeros(rows.rows(), out_cols);
    for (i, m) in mats.iter().enumerate() {
        if m.rows() != d || m.cols() != out_cols {
            return Err(Error::shape(
                "batched_transform",
                format!("matrix {i} is {:?}, expected {d}x{out_cols}", m.shape()),
            ));
        }
        out.row_mut(i).copy_from_slice(&vec_matmul(rows.row(i), m));
    }
    Ok(out)
}

/// Scale each row to unit L2 norm; rows with norm below [`ROW_NORM_EPS`] are copied as-is.
pub fn row_normalize(m: &DenseMatrix) -> DenseMatrix {
    let mut out = m.clone();
    row_normalize_in_place(&mut out);
    out
}

pub fn row_normalize_in_place(m: &mut DenseMatrix) {
    for r in 0..m.rows() {
        normalize_slice(m.row_mut(r));
    }
}

/// Normalizes `v` in place and returns the norm it had.
pub fn normalize_slice(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm >= ROW_NORM_EPS {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Entries uniform in `±sqrt(6 / (rows + cols))`.
pub fn xavier_uniform<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    let bound = xavier_bound(rows, cols);
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    DenseMatrix { rows, cols, data }
}

pub fn xavier_bound(rows: usize, cols: usize) -> f64 {
    (6.0 / (rows + cols) as f64).sqrt()
}
