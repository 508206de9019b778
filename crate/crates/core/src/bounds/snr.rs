use super::BoundResult;
use crate::cholesky_deriv::CholeskyPair;
use crate::error::{Error, Result};
use crate::linalg::Real;
use crate::moments::{hankel_smallest_eigenvalues, moment_sequence, ObjectModel};
use crate::otf::{otf_moments, OtfModel};

#[derive(Clone, Debug)]
pub struct SnrResult {
    pub mu: usize,
    pub delta: Real,
    pub photons: Real,
    /// `N K̃_μμ θ_μ²`
    pub value: Real,
    /// `χ_q` and `χ'_q` for even `μ = 2q`.
    pub chi: Option<Real>,
    pub chi_bound: Option<Real>,
}

pub fn qsnr(bound: &BoundResult, theta_mu: &Real, photons: &Real, delta: &Real) -> SnrResult {
    SnrResult {
        mu: bound.mu,
        delta: delta.clone(),
        photons: photons.clone(),
        value: &bound.value * theta_mu.square() * photons,
        chi: None,
        chi_bound: None,
    }
}

/// `χ_q = m_2q φ_2q² / (q!² V_qq²)` from the normalized factor.
pub fn prefactors(pair: &CholeskyPair, otf: &OtfModel, obj: &ObjectModel, q: usize) -> Result<Real> {
    if q > pair.q_max {
        return Err(Error::InsufficientOrder {
            needed: 2 * q,
            available: 2 * pair.q_max,
        });
    }
    let prec = pair.precision();
    let phi = &moment_sequence(obj, 2 * q)?.phi[2 * q];
    let m = otf_moments(otf, q).pop().expect("non-empty");
    Ok(m * phi.square() / (Real::factorial(q as u32, prec).square() * pair.v[(q, q)].square()))
}

/// `χ'_q = (2q)! β^(2q) / (q!³ 2^q λ_q)`.
pub fn prefactor_bound(otf: &OtfModel, obj: &ObjectModel, q: usize) -> Result<Real> {
    let prec = otf.precision();
    let lambda = hankel_smallest_eigenvalues(obj, &[q])?.remove(0);
    let num = Real::factorial(2 * q as u32, prec) * otf.beta().powi(2 * q as i32);
    let den = Real::factorial(q as u32, prec).powi(3) * Real::from_int(2, prec).powi(q as i32) * lambda;
    Ok(num / den)
}

impl SnrResult {
    /// Attaches `χ_q`, `χ'_q` for even μ.
    pub fn with_prefactors(mut self, pair: &CholeskyPair, otf: &OtfModel, obj: &ObjectModel) -> Result<Self> {
        if self.mu % 2 == 0 && self.mu > 0 {
            let q = self.mu / 2;
            self.chi = Some(prefactors(pair, otf, obj, q)?);
            self.chi_bound = Some(prefactor_bound(otf, obj, q)?);
        }
        Ok(self)
    }

    pub fn prefactor_ok(&self) -> Option<bool> {
        match (&self.chi, &self.chi_bound) {
            (Some(c), Some(b)) => Some(c <= b),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{BoundPipeline, DEFAULT_RTOL};
    use crate::linalg::Precision;

    fn real(x: f64) -> Real {
        Real::from_f64(x, Precision::default())
    }

    #[test]
    fn second_moment_snr() {
        let d = 0.01;
        let obj = ObjectModel::gaussian(real(d)).unwrap();
        let otf = OtfModel::gaussian(real(1.0)).unwrap();
        let p = BoundPipeline::new(&obj, &otf, 16, None, DEFAULT_RTOL).unwrap();
        let b = p.k_tilde(2, 2).unwrap();
        let s = qsnr(&b, &p.pair.theta[2], &real(1.0), obj.delta());
        assert!((s.value.to_f64() / (d * d) - 1.0).abs() < 0.02);
    }

    #[test]
    fn odd_centered_snr_is_zero() {
        let obj = ObjectModel::gaussian(real(0.05)).unwrap();
        let otf = OtfModel::gaussian(real(1.0)).unwrap();
        let p = BoundPipeline::new(&obj, &otf, 10, None, DEFAULT_RTOL).unwrap();
        let b = p.k_tilde(3, 3).unwrap();
        let s = qsnr(&b, &p.pair.theta[3], &real(100.0), obj.delta());
        assert!(s.value.is_zero());
    }

    #[test]
    fn uniform_prefactor_bound_holds() {
        let obj = ObjectModel::uniform(real(0.1)).unwrap();
        let otf = OtfModel::gaussian(real(1.0)).unwrap();
        let p = BoundPipeline::new(&obj, &otf, 12, None, DEFAULT_RTOL).unwrap();
        for q in 1..=10 {
            let chi = prefactors(&p.pair, &otf, &obj, q).unwrap();
            let bound = prefactor_bound(&otf, &obj, q).unwrap();
            assert!(chi <= bound, "q = {q}");
        }
    }
}
