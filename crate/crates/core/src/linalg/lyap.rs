use super::eigen::sym_eigen;
use super::matrix::{Matrix, SymMatrix};
use super::real::Real;
use crate::error::{Error, Result};

/// Solves `rhs = (L gamma + gamma L) / 2` for symmetric `L`.
///
/// In the eigenbasis of `gamma` the equation decouples:
/// `L_jl = 2 (e_j^T rhs e_l) / (gamma_j + gamma_l)`.
pub fn lyap_solve(gamma: &SymMatrix, rhs: &SymMatrix) -> Result<SymMatrix> {
    let n = gamma.dim();
    if rhs.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "gamma is {n}x{n}, rhs is {0}x{0}",
            rhs.dim()
        )));
    }
    let eig = sym_eigen(gamma)?;
    if let Some(j) = eig.values.iter().position(|g| !g.is_positive()) {
        return Err(Error::NotPositiveDefinite(j));
    }
    let e = &eig.vectors;
    let rotated = e.transpose().matmul(&rhs.to_dense())?.matmul(e)?;
    let scaled = Matrix::from_fn(n, n, |j, l| {
        &rotated[(j, l)] * 2.0 / (&eig.values[j] + &eig.values[l])
    });
    let back = e.matmul(&scaled)?.matmul(&e.transpose())?;
    Ok(back.symmetrize())
}

/// Frobenius norm of `(L gamma + gamma L)/2 - rhs`.
pub fn lyap_residual(gamma: &SymMatrix, rhs: &SymMatrix, l: &SymMatrix) -> Real {
    let g = gamma.to_dense();
    let ld = l.to_dense();
    let lg = ld.matmul(&g).expect("square");
    let gl = g.matmul(&ld).expect("square");
    let n = gamma.dim();
    let lhs = Matrix::from_fn(n, n, |i, j| (&lg[(i, j)] + &gl[(i, j)]) / 2.0);
    lhs.sub(&rhs.to_dense()).frobenius_norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Precision;

    #[test]
    fn identity_gamma_returns_rhs() {
        let prec = Precision::default();
        let rhs = SymMatrix::from_f64_rows(&[&[1.0, 2.0], &[2.0, -3.0]], prec);
        let l = lyap_solve(&SymMatrix::identity(2, prec), &rhs).unwrap();
        assert!(l.sub(&rhs).frobenius_norm() < prec.tolerance(8));
    }

    #[test]
    fn diagonal_gamma_scales_elementwise() {
        let prec = Precision::default();
        let gamma = SymMatrix::from_f64_rows(&[&[1.0, 0.0], &[0.0, 3.0]], prec);
        let rhs = SymMatrix::from_f64_rows(&[&[0.0, 1.0], &[1.0, 0.0]], prec);
        let l = lyap_solve(&gamma, &rhs).unwrap();
        let tol = prec.tolerance(8);
        assert!((&l[(0, 1)] - 0.5).abs() < tol);
        assert!(l[(0, 0)].abs() < tol);
        assert!(l[(1, 1)].abs() < tol);
    }

    #[test]
    fn rejects_singular_gamma() {
        let prec = Precision::default();
        let gamma = SymMatrix::from_f64_rows(&[&[1.0, 0.0], &[0.0, 0.0]], prec);
        let rhs = SymMatrix::identity(2, prec);
        assert!(matches!(
            lyap_solve(&gamma, &rhs),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn random_spd_residual() {
        let prec = Precision::default();
        let a = Matrix::from_f64_rows(
            &[
                &[0.3, -1.2, 0.5, 0.9],
                &[1.1, 0.2, -0.7, 0.4],
                &[-0.6, 0.8, 1.3, -0.2],
                &[0.25, -0.35, 0.45, 1.05],
            ],
            prec,
        );
        let mut gamma = SymMatrix::from_lower_of(&a.matmul(&a.transpose()).unwrap());
        for i in 0..4 {
            let d = &gamma[(i, i)] + 1e-3;
            gamma.set(i, i, d);
        }
        let rhs = SymMatrix::from_f64_rows(
            &[
                &[1.0, 0.2, -0.4, 0.0],
                &[0.2, -0.5, 0.3, 0.7],
                &[-0.4, 0.3, 2.0, 0.1],
                &[0.0, 0.7, 0.1, -1.0],
            ],
            prec,
        );
        let l = lyap_solve(&gamma, &rhs).unwrap();
        assert!(lyap_residual(&gamma, &rhs, &l) < 1e-40);
    }
}
