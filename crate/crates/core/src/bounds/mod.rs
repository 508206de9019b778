//! The bound K̃ and the quantities reported alongside it.

mod constellation;
mod direct;
mod snr;
mod tail;

pub use constellation::ConstellationBounds;
pub use direct::{direct_imaging_fisher, DirectFisher, DIRECT_GRID_POINTS, DIRECT_GRID_WIDTH};
pub use snr::{prefactor_bound, prefactors, qsnr, SnrResult};
pub use tail::{check_window, tail_diagnostics, TailReport};

use crate::cholesky_deriv::{derivative_recursive, object_cholesky, CholeskyDerivative, CholeskyPair};
use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, LowerTriangular, Matrix, Real, SymMatrix};
use crate::moments::ObjectModel;
use crate::otf::{default_w, otf_moments, pi_matrix, OtfModel, PiMatrix};

pub const DEFAULT_Q_MAX: usize = 30;
pub const DEFAULT_RTOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Converged,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Converged => "converged",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug)]
pub struct BoundResult {
    pub mu: usize,
    pub nu: usize,
    pub q_max: usize,
    /// Truncated `K̃_μν`.
    pub value: Real,
    /// Contribution of shell `max(s, t) = q` for q = 0..=q_max.
    pub increments: Vec<Real>,
    /// `tr Π Λ Λ^T - 1`
    pub norm_residual: Real,
    /// `max(|tr Π Λ_{,μ} Λ^T|, |tr Π Λ_{,ν} Λ^T|)`
    pub b_residual: Real,
    /// Geometric extrapolation of the omitted shells.
    pub tail_estimate: Real,
    pub verdict: Verdict,
}

/// `tr Π A B^T` split into shells `max(s, t) = q`.
fn shell_trace(pi: &SymMatrix, a: &LowerTriangular, b: &LowerTriangular) -> Result<Vec<Real>> {
    let n = pi.dim();
    if a.dim() != n || b.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "Π is {n}x{n}, derivative factors are {}x{} and {}x{}",
            a.dim(),
            a.dim(),
            b.dim(),
            b.dim()
        )));
    }
    let prec = pi.precision();
    // M_ts = Σ_r A_tr B_sr
    let m = |t: usize, s: usize| -> Real {
        let mut acc = Real::zero(prec);
        for r in 0..=t.min(s) {
            acc += &a[(t, r)] * &b[(s, r)];
        }
        acc
    };
    let mut shells = Vec::with_capacity(n);
    for q in 0..n {
        let mut acc = Real::zero(prec);
        for t in 0..=q {
            let p = &pi[(q, t)];
            if p.is_zero() {
                continue;
            }
            if t == q {
                acc += p * m(q, q);
            } else {
                acc += p * (m(t, q) + m(q, t));
            }
        }
        shells.push(acc);
    }
    Ok(shells)
}

fn tail_extrapolation(increments: &[Real]) -> Real {
    let prec = increments[0].precision();
    let nonzero: Vec<Real> = increments.iter().filter(|x| !x.is_zero()).map(|x| x.abs()).collect();
    match nonzero.len() {
        0 => Real::zero(prec),
        1 => nonzero[0].clone(),
        k => {
            let last = &nonzero[k - 1];
            let ratio = last / &nonzero[k - 2];
            if ratio < 1.0 {
                last * &ratio / (Real::one(prec) - &ratio)
            } else {
                last.clone()
            }
        }
    }
}

/// `K̃_μν = 4 tr Π Λ_{,μ} Λ_{,ν}^T` with its residuals and verdict.
pub fn k_tilde(
    pi: &PiMatrix,
    pair: &CholeskyPair,
    d_mu: &CholeskyDerivative,
    d_nu: &CholeskyDerivative,
    rtol: f64,
) -> Result<BoundResult> {
    if pi.q_max != pair.q_max {
        return Err(Error::DimensionMismatch(format!(
            "Π truncated at {}, factors at {}",
            pi.q_max, pair.q_max
        )));
    }
    let prec = pair.precision();
    let increments: Vec<Real> = shell_trace(&pi.pi, &d_mu.matrix, &d_nu.matrix)?
        .into_iter()
        .map(|x| x * 4.0)
        .collect();
    let value = crate::linalg::sum_with(prec, increments.iter().cloned());
    let norm = crate::linalg::sum_with(prec, shell_trace(&pi.pi, &pair.lambda, &pair.lambda)?);
    let b = |d: &CholeskyDerivative| -> Result<Real> {
        Ok(crate::linalg::sum_with(prec, shell_trace(&pi.pi, &d.matrix, &pair.lambda)?).abs())
    };
    let b_residual = b(d_mu)?.max(b(d_nu)?);
    let threshold = value.abs() * rtol;
    let last3 = &increments[increments.len().saturating_sub(3)..];
    let verdict = if increments.len() >= 3 && last3.iter().all(|x| x.abs() <= threshold) {
        Verdict::Converged
    } else {
        Verdict::Inconclusive
    };
    Ok(BoundResult {
        mu: d_mu.mu,
        nu: d_nu.mu,
        q_max: pair.q_max,
        tail_estimate: tail_extrapolation(&increments),
        value,
        increments,
        norm_residual: norm - 1.0,
        b_residual,
        verdict,
    })
}

/// Closed-form leading term of `K̃_μμ` from the exact factor entries.
///
/// Even μ: `m_2q / (q!² Λ_qq²)` with `q = μ/2`. Odd μ:
/// `4 m_2q / (q!² Λ²_(q-1,q-1)) · [1 + (Λ_(q,q-1)/Λ_qq)²]` with `q = (μ+1)/2`,
/// where `m_2q` is the OTF moment.
pub fn leading_order(pair: &CholeskyPair, otf: &OtfModel, mu: usize) -> Result<Real> {
    if mu == 0 {
        return Err(Error::InvalidInput("leading order needs mu >= 1".into()));
    }
    let q = mu.div_ceil(2);
    if q > pair.q_max {
        return Err(Error::InsufficientOrder {
            needed: 2 * q,
            available: 2 * pair.q_max,
        });
    }
    let prec = pair.precision();
    let m = otf_moments(otf, q).pop().expect("non-empty");
    let fq = Real::factorial(q as u32, prec).square();
    let l = &pair.lambda;
    if mu % 2 == 0 {
        Ok(m / (fq * l[(q, q)].square()))
    } else {
        let ratio = (&l[(q, q - 1)] / &l[(q, q)]).square();
        Ok(m * 4.0 / (fq * l[(q - 1, q - 1)].square()) * (ratio + 1.0))
    }
}

/// Everything needed to evaluate K̃ for one object and OTF.
#[derive(Clone, Debug)]
pub struct BoundPipeline {
    pub object: ObjectModel,
    pub otf: OtfModel,
    pub pair: CholeskyPair,
    pub pi: PiMatrix,
    pub rtol: f64,
}

impl BoundPipeline {
    /// `w = None` selects the default scaling constant.
    pub fn new(object: &ObjectModel, otf: &OtfModel, q_max: usize, w: Option<Real>, rtol: f64) -> Result<Self> {
        if let Some(atoms) = object.finite_support() {
            return Err(Error::FiniteSupport { atoms });
        }
        let pair = object_cholesky(object, q_max)?;
        let w = w.unwrap_or_else(|| {
            default_w(matches!(object.kind(), crate::moments::ObjectKind::Gaussian), otf, object.delta())
        });
        let pi = pi_matrix(otf, q_max, &w)?;
        Ok(BoundPipeline {
            object: object.clone(),
            otf: otf.clone(),
            pair,
            pi,
            rtol,
        })
    }

    pub fn derivative(&self, mu: usize) -> Result<CholeskyDerivative> {
        derivative_recursive(&self.pair, mu)
    }

    pub fn k_tilde(&self, mu: usize, nu: usize) -> Result<BoundResult> {
        let a = self.derivative(mu)?;
        let b = if nu == mu { a.clone() } else { self.derivative(nu)? };
        k_tilde(&self.pi, &self.pair, &a, &b, self.rtol)
    }

    pub fn leading_order(&self, mu: usize) -> Result<Real> {
        leading_order(&self.pair, &self.otf, mu)
    }

    /// Symmetric matrix `K̃_μν` over the given parameters.
    pub fn k_tilde_matrix(&self, mus: &[usize]) -> Result<SymMatrix> {
        let derivs: Vec<CholeskyDerivative> = mus.iter().map(|&m| self.derivative(m)).collect::<Result<_>>()?;
        let mut out = SymMatrix::zeros(mus.len(), self.pair.precision());
        for i in 0..mus.len() {
            for j in 0..=i {
                let r = k_tilde(&self.pi, &self.pair, &derivs[i], &derivs[j], self.rtol)?;
                out.set(i, j, r.value);
            }
        }
        Ok(out)
    }
}

/// Diagonal of the inverse of a K̃ matrix (multiparameter diagnostic).
pub fn inverse_diagonal(k: &SymMatrix) -> Result<Vec<Real>> {
    let eig = sym_eigen(k)?;
    if let Some(j) = eig.values.iter().position(|v| !v.is_positive()) {
        return Err(Error::NotPositiveDefinite(j));
    }
    let n = k.dim();
    let e: &Matrix = &eig.vectors;
    Ok((0..n)
        .map(|i| {
            let mut acc = Real::zero(k.precision());
            for j in 0..n {
                acc += e[(i, j)].square() / &eig.values[j];
            }
            acc
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Precision;

    fn prec() -> Precision {
        Precision::default()
    }

    fn real(x: f64) -> Real {
        Real::from_f64(x, prec())
    }

    fn gg(delta: f64, q_max: usize) -> BoundPipeline {
        let obj = ObjectModel::gaussian(real(delta)).unwrap();
        let otf = OtfModel::gaussian(real(1.0)).unwrap();
        BoundPipeline::new(&obj, &otf, q_max, None, DEFAULT_RTOL).unwrap()
    }

    #[test]
    fn first_moment_bound_is_four_beta_squared() {
        let p = gg(0.01, 20);
        let r = p.k_tilde(1, 1).unwrap();
        assert!((r.value.to_f64() / 4.0 - 1.0).abs() < 0.01);
        assert_eq!(r.verdict, Verdict::Converged);
    }

    #[test]
    fn second_moment_bound_scales_as_inverse_delta_squared() {
        let d = 0.01;
        let p = gg(d, 20);
        let r = p.k_tilde(2, 2).unwrap();
        assert!((r.value.to_f64() * d * d - 1.0).abs() < 0.02);
    }

    #[test]
    fn mixed_parity_vanishes_for_centered_object() {
        let p = gg(0.05, 16);
        let r = p.k_tilde(1, 2).unwrap();
        assert!(r.value.abs() < 1e-60);
    }

    #[test]
    fn constellation_is_rejected() {
        let obj = ObjectModel::points(vec![real(-1.0), real(1.0)], vec![real(0.5), real(0.5)], real(0.1)).unwrap();
        let otf = OtfModel::gaussian(real(1.0)).unwrap();
        assert!(matches!(
            BoundPipeline::new(&obj, &otf, 10, None, DEFAULT_RTOL),
            Err(Error::FiniteSupport { .. })
        ));
    }

    #[test]
    fn leading_orders() {
        let d = 0.01;
        let p = gg(d, 6);
        let l2 = p.leading_order(2).unwrap().to_f64();
        assert!((l2 * d * d - 1.0).abs() < 1e-12);
        let l1 = p.leading_order(1).unwrap().to_f64();
        assert!((l1 - 4.0).abs() < 1e-12);
        // μ = 4: m_4 / (4 Λ_22²) = 3 / (4 · 2 Δ⁴)
        let l4 = p.leading_order(4).unwrap().to_f64();
        assert!((l4 * d.powi(4) - 3.0 / 8.0).abs() < 1e-10);
    }

    #[test]
    fn identities_hold() {
        for d in [0.05, 0.2] {
            let p = gg(d, 30);
            for mu in 1..=4 {
                let r = p.k_tilde(mu, mu).unwrap();
                assert!(r.norm_residual.abs() < 1e-10, "norm {}", r.norm_residual.to_f64());
                assert!(r.b_residual < 1e-10, "B {}", r.b_residual.to_f64());
            }
        }
    }

    #[test]
    fn k_matrix_is_psd_and_cauchy_schwarz() {
        let obj = ObjectModel::uniform(real(0.1)).unwrap().with_center(real(0.2));
        let otf = OtfModel::gaussian(real(1.0)).unwrap();
        let p = BoundPipeline::new(&obj, &otf, 20, None, DEFAULT_RTOL).unwrap();
        let k = p.k_tilde_matrix(&[1, 2, 3, 4]).unwrap();
        let eig = sym_eigen(&k).unwrap();
        assert!(eig.values[0].to_f64() > -1e-30 * eig.values[3].to_f64());
        for i in 0..4 {
            for j in 0..i {
                let bound = (&k[(i, i)] * &k[(j, j)]).sqrt();
                assert!(k[(i, j)].abs() <= bound);
            }
        }
        let inv = inverse_diagonal(&k).unwrap();
        assert!(inv.iter().all(|v| v.is_positive()));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let p = gg(0.1, 6);
        let other = pi_matrix(&p.otf, 4, &real(1.0)).unwrap();
        let d = p.derivative(1).unwrap();
        assert!(matches!(
            k_tilde(&other, &p.pair, &d, &d, DEFAULT_RTOL),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
