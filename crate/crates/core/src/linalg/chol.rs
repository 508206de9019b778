use super::matrix::{LowerTriangular, SymMatrix};
use super::real::Real;
use crate::error::{Error, Result};

/// Cholesky factorization `m = L L^T`.
///
/// A pivot is rejected when it is not above `2^-(bits-8)` times its diagonal
/// entry: at that size it is indistinguishable from the rounding residue of a
/// singular matrix.
pub fn chol(m: &SymMatrix) -> Result<LowerTriangular> {
    let n = m.dim();
    let prec = m.precision();
    let floor = prec.tolerance(8);
    let mut l = LowerTriangular::zeros(n, prec);
    for i in 0..n {
        for j in 0..=i {
            let mut acc = m[(i, j)].clone();
            for k in 0..j {
                acc -= &l[(i, k)] * &l[(j, k)];
            }
            if i == j {
                if !acc.is_positive() || acc <= &floor * m[(i, i)].abs() {
                    return Err(Error::NotPositiveDefinite(i));
                }
                l.set(i, i, acc.sqrt());
            } else {
                let v = acc / &l[(j, j)];
                l.set(i, j, v);
            }
        }
    }
    Ok(l)
}

/// Relative Frobenius reconstruction error `||L L^T - m|| / ||m||`.
pub fn reconstruction_error(m: &SymMatrix, l: &LowerTriangular) -> Real {
    l.gram().sub(m).frobenius_norm() / m.frobenius_norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Precision;
    use proptest::prelude::*;

    #[test]
    fn identity_factors_to_identity() {
        let prec = Precision::default();
        let l = chol(&SymMatrix::identity(3, prec)).unwrap();
        assert_eq!(l.to_dense(), crate::linalg::Matrix::identity(3, prec));
    }

    #[test]
    fn two_by_two_example() {
        let prec = Precision::default();
        let m = SymMatrix::from_f64_rows(&[&[4.0, 2.0], &[2.0, 5.0]], prec);
        let l = chol(&m).unwrap();
        assert_eq!(l[(0, 0)], 2.0);
        assert_eq!(l[(1, 0)], 1.0);
        assert_eq!(l[(1, 1)], 2.0);
    }

    #[test]
    fn rank_deficient_fails_at_second_pivot() {
        let prec = Precision::default();
        let m = SymMatrix::from_f64_rows(&[&[1.0, 1.0], &[1.0, 1.0]], prec);
        assert_eq!(chol(&m), Err(Error::NotPositiveDefinite(1)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn reconstructs_random_spd(n in 1usize..=20, seed in proptest::collection::vec(-1.0f64..1.0, 400)) {
            let prec = Precision::default();
            let a = crate::linalg::Matrix::from_fn(n, n, |i, j| Real::from_f64(seed[i * 20 + j], prec));
            let mut m = SymMatrix::from_lower_of(&a.matmul(&a.transpose()).unwrap());
            for i in 0..n {
                let d = &m[(i, i)] + 1e-3;
                m.set(i, i, d);
            }
            let l = chol(&m).unwrap();
            prop_assert!(reconstruction_error(&m, &l) <= prec.tolerance(8));
            for i in 0..n {
                prop_assert!(l[(i, i)].is_positive());
            }
        }
    }
}
