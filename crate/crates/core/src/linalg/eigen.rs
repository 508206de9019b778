//! Cyclic Jacobi eigensolver for real symmetric matrices.

use super::matrix::{Matrix, SymMatrix};
use super::real::Real;
use crate::error::{Error, Result};

pub const MAX_SWEEPS: usize = 100;

/// Eigenvalues in ascending order with matching orthonormal eigenvectors
/// stored as the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: Vec<Real>,
    pub vectors: Matrix,
}

impl SymEigen {
    pub fn vector(&self, j: usize) -> Vec<Real> {
        self.vectors.column(j)
    }

    /// `E diag(values) E^T`.
    pub fn reconstruct(&self) -> SymMatrix {
        let n = self.values.len();
        let prec = self.vectors.precision();
        SymMatrix::from_fn(n, |i, j| {
            let mut acc = Real::zero(prec);
            for k in 0..n {
                acc += &self.vectors[(i, k)] * &self.vectors[(j, k)] * &self.values[k];
            }
            acc
        })
    }
}

/// Diagonalizes `m` with cyclic Jacobi rotations.
///
/// A pair `(p, q)` is annihilated unless `|a_pq| <= eps * sqrt(|a_pp a_qq|)`,
/// which keeps small eigenvalues of graded matrices relatively accurate. The
/// sweep loop stops once a full sweep performs no rotation.
pub fn sym_eigen(m: &SymMatrix) -> Result<SymEigen> {
    let n = m.dim();
    let prec = m.precision();
    let eps = prec.epsilon();
    // Absolute floor for off-diagonals that are pure rounding residue.
    let tiny = prec.epsilon().square() * m.frobenius_norm();
    let mut a = m.to_dense();
    let mut v = Matrix::identity(n, prec);

    for sweep in 0..=MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)].clone();
                if apq.is_zero() {
                    continue;
                }
                let scale = (&a[(p, p)] * &a[(q, q)]).abs().sqrt();
                let abs_apq = apq.abs();
                if abs_apq <= &eps * &scale || abs_apq <= tiny {
                    continue;
                }
                if sweep == MAX_SWEEPS {
                    return Err(Error::NoConvergence(MAX_SWEEPS));
                }
                rotated = true;
                rotate(&mut a, &mut v, p, q);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]).then(i.cmp(&j)));
    let values: Vec<Real> = order.iter().map(|&i| a[(i, i)].clone()).collect();
    let mut vectors = Matrix::from_fn(n, n, |i, k| v[(i, order[k])].clone());
    // Sign convention: the largest-magnitude component of each vector is positive.
    for k in 0..n {
        let mut pivot = 0;
        for i in 1..n {
            if vectors[(i, k)].abs() > vectors[(pivot, k)].abs() {
                pivot = i;
            }
        }
        if vectors[(pivot, k)].is_negative() {
            for i in 0..n {
                let x = -&vectors[(i, k)];
                vectors[(i, k)] = x;
            }
        }
    }
    Ok(SymEigen { values, vectors })
}

/// Applies the rotation that zeroes `a[p][q]`, accumulating it into `v`.
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let n = a.rows();
    let apq = a[(p, q)].clone();
    let theta = (&a[(q, q)] - &a[(p, p)]) / (&apq * 2.0);
    let root = (theta.square() + 1.0).sqrt();
    let t = if theta.is_negative() {
        -(theta.abs() + &root).recip()
    } else {
        (theta.abs() + &root).recip()
    };
    let c = (t.square() + 1.0).sqrt().recip();
    let s = &t * &c;

    let app = &a[(p, p)] - &t * &apq;
    let aqq = &a[(q, q)] + &t * &apq;
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a[(k, p)].clone();
        let akq = a[(k, q)].clone();
        let new_kp = &c * &akp - &s * &akq;
        let new_kq = &s * &akp + &c * &akq;
        a[(k, p)] = new_kp.clone();
        a[(p, k)] = new_kp;
        a[(k, q)] = new_kq.clone();
        a[(q, k)] = new_kq;
    }
    a[(p, p)] = app;
    a[(q, q)] = aqq;
    let zero = Real::zero(apq.precision());
    a[(p, q)] = zero.clone();
    a[(q, p)] = zero;

    for k in 0..n {
        let vkp = v[(k, p)].clone();
        let vkq = v[(k, q)].clone();
        v[(k, p)] = &c * &vkp - &s * &vkq;
        v[(k, q)] = &s * &vkp + &c * &vkq;
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &SymMatrix) -> Result<Real> {
    let eig = sym_eigen(m)?;
    Ok(eig.values[0].clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Precision;
    use proptest::prelude::*;

    #[test]
    fn diagonal_input_sorts_and_permutes() {
        let prec = Precision::default();
        let m = SymMatrix::from_f64_rows(&[&[3.0, 0.0], &[0.0, 1.0]], prec);
        let e = sym_eigen(&m).unwrap();
        assert_eq!(e.values[0], 1.0);
        assert_eq!(e.values[1], 3.0);
        assert_eq!(e.vectors[(1, 0)], 1.0);
        assert_eq!(e.vectors[(0, 1)], 1.0);
    }

    #[test]
    fn swap_matrix() {
        let prec = Precision::default();
        let m = SymMatrix::from_f64_rows(&[&[0.0, 1.0], &[1.0, 0.0]], prec);
        let e = sym_eigen(&m).unwrap();
        let tol = prec.tolerance(8);
        assert!((&e.values[0] + 1.0).abs() < tol);
        assert!((&e.values[1] - 1.0).abs() < tol);
        let h = Real::from_int(2, prec).sqrt().recip();
        // (1, -1)/sqrt2 up to sign for -1, (1, 1)/sqrt2 for +1.
        assert!((e.vectors[(0, 0)].abs() - &h).abs() < tol);
        assert!((&e.vectors[(0, 0)] + &e.vectors[(1, 0)]).abs() < tol);
        assert!((&e.vectors[(0, 1)] - &e.vectors[(1, 1)]).abs() < tol);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn reconstruction_trace_and_orthonormality(n in 1usize..=8, seed in proptest::collection::vec(-1.0f64..1.0, 64)) {
            let prec = Precision::default();
            let m = SymMatrix::from_fn(n, |i, j| Real::from_f64(seed[i * 8 + j], prec));
            let e = sym_eigen(&m).unwrap();
            let norm = m.frobenius_norm();
            let tol = prec.tolerance(8) * (n as f64) * &norm;
            prop_assert!(e.reconstruct().sub(&m).frobenius_norm() <= tol);
            let gram = e.vectors.transpose().matmul(&e.vectors).unwrap();
            prop_assert!(gram.sub(&Matrix::identity(n, prec)).frobenius_norm() <= prec.tolerance(8) * (n as f64));
            let sum = crate::linalg::sum_with(prec, e.values.iter().cloned());
            prop_assert!((sum - m.trace()).abs() <= tol);
            for w in e.values.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
        }
    }
}
