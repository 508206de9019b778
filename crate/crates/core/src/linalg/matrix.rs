//! Dense matrix containers over [`Real`].
//!
//! All reductions run row-major with ascending indices so results do not
//! depend on the caller's threading.

use std::ops::{Index, IndexMut};

use super::real::{Precision, Real};
use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Real>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize, prec: Precision) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![Real::zero(prec); rows * cols],
        }
    }

    pub fn identity(n: usize, prec: Precision) -> Self {
        let mut m = Matrix::zeros(n, n, prec);
        for i in 0..n {
            m[(i, i)] = Real::one(prec);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Real) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_f64_rows(rows: &[&[f64]], prec: Precision) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        Matrix::from_fn(rows.len(), cols, |i, j| Real::from_f64(rows[i][j], prec))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let prec = self.precision();
        Ok(Matrix::from_fn(self.rows, rhs.cols, |i, j| {
            let mut acc = Real::zero(prec);
            for k in 0..self.cols {
                acc += &self[(i, k)] * &rhs[(k, j)];
            }
            acc
        }))
    }

    pub fn sub(&self, rhs: &Matrix) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |i, j| &self[(i, j)] - &rhs[(i, j)])
    }

    pub fn frobenius_norm(&self) -> Real {
        let mut acc = Real::zero(self.precision());
        for x in &self.data {
            acc += x.square();
        }
        acc.sqrt()
    }

    pub fn trace(&self) -> Real {
        let mut acc = Real::zero(self.precision());
        for i in 0..self.rows.min(self.cols) {
            acc += &self[(i, i)];
        }
        acc
    }

    pub fn column(&self, j: usize) -> Vec<Real> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn precision(&self) -> Precision {
        self.data
            .first()
            .map_or_else(Precision::default, Real::precision)
    }

    /// Symmetric part, `(M + M^T)/2`.
    pub fn symmetrize(&self) -> SymMatrix {
        SymMatrix::from_fn(self.rows, |i, j| {
            if i == j {
                self[(i, i)].clone()
            } else {
                (&self[(i, j)] + &self[(j, i)]) / 2.0
            }
        })
    }

    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)].to_f64()).collect())
            .collect()
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = Real;
    fn index(&self, (i, j): (usize, usize)) -> &Real {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Real {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
fn packed(i: usize, j: usize) -> usize {
    i * (i + 1) / 2 + j
}

/// Symmetric matrix; only the lower triangle is stored, so `m[(i,j)]` and
/// `m[(j,i)]` are the same value by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<Real>,
}

impl SymMatrix {
    pub fn zeros(n: usize, prec: Precision) -> Self {
        SymMatrix {
            n,
            data: vec![Real::zero(prec); n * (n + 1) / 2],
        }
    }

    pub fn identity(n: usize, prec: Precision) -> Self {
        let mut m = SymMatrix::zeros(n, prec);
        for i in 0..n {
            m.set(i, i, Real::one(prec));
        }
        m
    }

    /// Builds from `f(i, j)` evaluated on the lower triangle (`j <= i`).
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Real) -> Self {
        let mut data = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in 0..=i {
                data.push(f(i, j));
            }
        }
        SymMatrix { n, data }
    }

    pub fn from_f64_rows(rows: &[&[f64]], prec: Precision) -> Self {
        SymMatrix::from_fn(rows.len(), |i, j| Real::from_f64(rows[i][j], prec))
    }

    /// Symmetric view of a dense matrix, reading its lower triangle.
    pub fn from_lower_of(m: &Matrix) -> Self {
        SymMatrix::from_fn(m.rows(), |i, j| m[(i, j)].clone())
    }

    pub fn diagonal(values: &[Real]) -> Self {
        let prec = values.first().map_or_else(Precision::default, Real::precision);
        let mut m = SymMatrix::zeros(values.len(), prec);
        for (i, v) in values.iter().enumerate() {
            m.set(i, i, v.clone());
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn set(&mut self, i: usize, j: usize, value: Real) {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        self.data[packed(i, j)] = value;
    }

    pub fn precision(&self) -> Precision {
        self.data
            .first()
            .map_or_else(Precision::default, Real::precision)
    }

    pub fn to_dense(&self) -> Matrix {
        Matrix::from_fn(self.n, self.n, |i, j| self[(i, j)].clone())
    }

    /// Upper-left `(k x k)` block.
    pub fn leading(&self, k: usize) -> SymMatrix {
        SymMatrix {
            n: k,
            data: self.data[..k * (k + 1) / 2].to_vec(),
        }
    }

    pub fn trace(&self) -> Real {
        let mut acc = Real::zero(self.precision());
        for i in 0..self.n {
            acc += &self[(i, i)];
        }
        acc
    }

    pub fn frobenius_norm(&self) -> Real {
        let mut acc = Real::zero(self.precision());
        for i in 0..self.n {
            for j in 0..self.n {
                acc += self[(i, j)].square();
            }
        }
        acc.sqrt()
    }

    pub fn scale(&self, s: &Real) -> SymMatrix {
        SymMatrix {
            n: self.n,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn add(&self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        self.to_dense().to_f64()
    }
}

impl Index<(usize, usize)> for SymMatrix {
    type Output = Real;
    fn index(&self, (i, j): (usize, usize)) -> &Real {
        if j > i {
            &self.data[packed(j, i)]
        } else {
            &self.data[packed(i, j)]
        }
    }
}

/// Lower-triangular matrix; entries above the diagonal are not stored and
/// read as zero.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerTriangular {
    n: usize,
    data: Vec<Real>,
    zero: Real,
}

impl LowerTriangular {
    pub fn zeros(n: usize, prec: Precision) -> Self {
        LowerTriangular {
            n,
            data: vec![Real::zero(prec); n * (n + 1) / 2],
            zero: Real::zero(prec),
        }
    }

    pub fn from_fn(n: usize, prec: Precision, mut f: impl FnMut(usize, usize) -> Real) -> Self {
        let mut data = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in 0..=i {
                data.push(f(i, j));
            }
        }
        LowerTriangular {
            n,
            data,
            zero: Real::zero(prec),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn precision(&self) -> Precision {
        self.zero.precision()
    }

    /// Writes entry `(i, j)` with `j <= i`.
    pub fn set(&mut self, i: usize, j: usize, value: Real) {
        assert!(j <= i, "LowerTriangular::set above the diagonal ({i}, {j})");
        self.data[packed(i, j)] = value;
    }

    pub fn row(&self, i: usize) -> &[Real] {
        &self.data[packed(i, 0)..packed(i, 0) + i + 1]
    }

    /// `L L^T`.
    pub fn gram(&self) -> SymMatrix {
        SymMatrix::from_fn(self.n, |i, j| {
            let mut acc = Real::zero(self.precision());
            for k in 0..=j {
                acc += &self[(i, k)] * &self[(j, k)];
            }
            acc
        })
    }

    /// Solves `L x = b` by forward substitution.
    pub fn solve(&self, b: &[Real]) -> Vec<Real> {
        let mut x: Vec<Real> = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let mut acc = b[i].clone();
            for (k, xk) in x.iter().enumerate() {
                acc -= &self[(i, k)] * xk;
            }
            x.push(acc / &self[(i, i)]);
        }
        x
    }

    pub fn to_dense(&self) -> Matrix {
        Matrix::from_fn(self.n, self.n, |i, j| self[(i, j)].clone())
    }

    pub fn max_abs(&self) -> Real {
        self.data
            .iter()
            .fold(self.zero.clone(), |acc, x| acc.max(x.abs()))
    }

    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        self.to_dense().to_f64()
    }
}

impl Index<(usize, usize)> for LowerTriangular {
    type Output = Real;
    fn index(&self, (i, j): (usize, usize)) -> &Real {
        if j > i {
            &self.zero
        } else {
            &self.data[packed(i, j)]
        }
    }
}
