use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use super::complex::Complex;
use crate::{Error, Result};

/// Dense row-major real matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Ok(Mat {
            rows: r,
            cols: c,
            data: rows.concat(),
        })
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Mat::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn matmul(&self, other: &Mat) -> Result<Mat> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = out.row_mut(i);
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · x` for a real vector.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "matvec dimension mismatch");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `self · x` for a complex vector (real matrix promoted at multiply time).
    pub fn matvec_c(&self, x: &[Complex]) -> Vec<Complex> {
        assert_eq!(self.cols, x.len(), "matvec dimension mismatch");
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(x)
                    .fold(Complex::new(0.0, 0.0), |acc, (a, b)| acc + b * *a)
            })
            .collect()
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!(self.shape(), other.shape());
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!(self.shape(), other.shape());
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn frob_norm(&self) -> f64 {
        self.frob_norm_sqr().sqrt()
    }

    pub fn frob_norm_sqr(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Sum of all coefficients.
    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// `‖AᵀA − I‖_∞` (entrywise max).
    pub fn orthogonality_defect(&self) -> f64 {
        let g = self.transpose().matmul(self).expect("square product");
        g.sub(&Mat::identity(self.cols)).max_abs()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Complex column vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CVector(pub Vec<Complex>);

impl CVector {
    pub fn zeros(n: usize) -> Self {
        CVector(vec![Complex::new(0.0, 0.0); n])
    }

    pub fn ones(n: usize) -> Self {
        CVector(vec![Complex::new(1.0, 0.0); n])
    }

    pub fn from_real(v: &[f64]) -> Self {
        CVector(v.iter().map(|x| Complex::new(*x, 0.0)).collect())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[Complex] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(Complex::norm_sqr).sum()
    }

    pub fn conj(&self) -> CVector {
        CVector(self.0.iter().map(Complex::conj).collect())
    }

    /// Elementwise product.
    pub fn hadamard(&self, other: &CVector) -> CVector {
        assert_eq!(self.len(), other.len());
        CVector(self.0.iter().zip(&other.0).map(|(a, b)| a * b).collect())
    }

    pub fn sub(&self, other: &CVector) -> CVector {
        assert_eq!(self.len(), other.len());
        CVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &CVector) -> CVector {
        assert_eq!(self.len(), other.len());
        CVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, s: Complex) -> CVector {
        CVector(self.0.iter().map(|a| a * s).collect())
    }

    /// Largest absolute imaginary part.
    pub fn max_imag(&self) -> f64 {
        self.0.iter().fold(0.0, |m, z| m.max(z.im.abs()))
    }

    pub fn re(&self) -> Vec<f64> {
        self.0.iter().map(|z| z.re).collect()
    }

    pub fn max_abs_diff(&self, other: &CVector) -> f64 {
        assert_eq!(self.len(), other.len());
        self.0
            .iter()
            .zip(&other.0)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }
}

impl Index<usize> for CVector {
    type Output = Complex;
    #[inline]
    fn index(&self, i: usize) -> &Complex {
        &self.0[i]
    }
}

impl IndexMut<usize> for CVector {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut Complex {
        &mut self.0[i]
    }
}

/// Dense row-major complex matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![Complex::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::new(1.0, 0.0);
        }
        m
    }

    pub fn from_real(m: &Mat) -> Self {
        CMatrix {
            rows: m.rows(),
            cols: m.cols(),
            data: m.as_slice().iter().map(|v| Complex::new(*v, 0.0)).collect(),
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        CMatrix { rows, cols, data }
    }

    pub fn diag(values: &CVector) -> Self {
        let n = values.len();
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = values[i];
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex] {
        &self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[Complex] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn matvec(&self, x: &CVector) -> CVector {
        assert_eq!(self.cols, x.len(), "matvec dimension mismatch");
        CVector(
            (0..self.rows)
                .map(|r| {
                    self.row(r)
                        .iter()
                        .zip(&x.0)
                        .fold(Complex::new(0.0, 0.0), |acc, (a, b)| acc + a * b)
                })
                .collect(),
        )
    }

    pub fn matmul(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn add(&self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn scale(&self, s: Complex) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    /// `x y^⋆` outer product.
    pub fn outer(x: &CVector, y: &CVector) -> CMatrix {
        CMatrix::from_fn(x.len(), y.len(), |r, c| x[r] * y[c].conj())
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(Complex::norm_sqr).sum::<f64>().sqrt()
    }

    /// Real part, provided every imaginary part is below `tol`.
    pub fn to_real(&self, tol: f64) -> Option<Mat> {
        if self.data.iter().any(|z| z.im.abs() > tol) {
            return None;
        }
        Some(Mat::from_fn(self.rows, self.cols, |r, c| self[(r, c)].re))
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &Complex {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex {
        &mut self.data[r * self.cols + c]
    }
}
