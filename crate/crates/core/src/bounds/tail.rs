use crate::cholesky_deriv::{CholeskyDerivative, CholeskyPair};
use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, Real};
use crate::moments::{ObjectKind, ObjectModel};
use crate::otf::{w_window, OtfModel, PiMatrix};

#[derive(Clone, Debug)]
pub struct TailReport {
    pub mu: usize,
    pub w: Real,
    /// Orders `q` the sequences below are indexed by, starting at `⌈μ/2⌉`.
    pub orders: Vec<usize>,
    /// Smallest eigenvalue of `Ξ_(q)`.
    pub lambda: Vec<Real>,
    /// `ζ_q = φ_2q / q! · (Δ/w)^(2q) / λ_q²`
    pub zeta: Vec<Real>,
    pub zeta_ratios: Vec<f64>,
    /// `η_q = Σ_r Λ²_(qr,μ)`
    pub eta: Vec<Real>,
    /// Hilbert-Schmidt terms `η_q / (q! w^(2q))` of `||Λ̃_{,μ}||²`.
    pub hs_terms: Vec<Real>,
    pub hs_ratios: Vec<f64>,
    pub hs_norm_sq: Real,
    /// `(μ+1)/2 · Δ^(-2μ) · Σ ζ_q`
    pub hs_bound: Real,
    /// `4 tr Π̃ ||Λ̃_{,μ}||²`, an upper bound on `K̃_μμ`.
    pub k_upper: Real,
    /// `2Δ²/w²` when the object is gaussian.
    pub limiting_ratio: Option<f64>,
}

/// Checks `w` against the window implied by the object and OTF kinds.
pub fn check_window(obj: &ObjectModel, otf: &OtfModel, w: &Real) -> Result<()> {
    let (lo, hi) = w_window(obj.delta(), otf.beta());
    let gaussian_obj = matches!(obj.kind(), ObjectKind::Gaussian);
    let lower_ok = !gaussian_obj || w > &lo;
    let upper_ok = !otf.is_gaussian() || w < &hi;
    if lower_ok && upper_ok {
        Ok(())
    } else {
        Err(Error::OutsideWindow {
            w: w.to_f64(),
            lower: if gaussian_obj { lo.to_f64() } else { 0.0 },
            upper: if otf.is_gaussian() { hi.to_f64() } else { f64::INFINITY },
        })
    }
}

fn ratios(xs: &[Real]) -> Vec<f64> {
    xs.windows(2).map(|w| (&w[1] / &w[0]).to_f64()).collect()
}

pub fn tail_diagnostics(
    pi: &PiMatrix,
    pair: &CholeskyPair,
    deriv: &CholeskyDerivative,
    obj: &ObjectModel,
    otf: &OtfModel,
) -> Result<TailReport> {
    let w = &pi.w;
    check_window(obj, otf, w)?;
    let prec = pair.precision();
    let mu = deriv.mu;
    let n = pair.dim();
    let delta = &pair.delta;
    let start = mu.div_ceil(2);
    let phi = crate::moments::moment_sequence(obj, 2 * pair.q_max)?.phi;
    let xi = crate::linalg::SymMatrix::from_fn(n, |q, p| phi[q + p].clone());
    let guard = prec.pow2(-((prec.bits() / 2) as i32));
    let mut orders = Vec::new();
    let mut lambda = Vec::new();
    let mut zeta = Vec::new();
    let mut eta = Vec::new();
    let mut hs_terms = Vec::new();
    let mut hs_norm_sq = Real::zero(prec);
    let mut fact = Real::one(prec);
    let ratio_sq = (delta / w).square();
    let w_sq = w.square();
    for q in 0..n {
        if q > 0 {
            fact *= q as f64;
        }
        let e = deriv.matrix.row(q).iter().fold(Real::zero(prec), |acc, x| acc + x.square());
        let term = &e / (&fact * w_sq.powi(q as i32));
        hs_norm_sq += &term;
        if q < start {
            continue;
        }
        let lam = sym_eigen(&xi.leading(q + 1))?.values[0].clone();
        if lam <= guard {
            return Err(Error::PrecisionExhausted {
                q,
                value: lam.to_f64(),
            });
        }
        let z = &phi[2 * q] / &fact * ratio_sq.powi(q as i32) / lam.square();
        orders.push(q);
        lambda.push(lam);
        zeta.push(z);
        eta.push(e);
        hs_terms.push(term);
    }
    let zeta_sum = crate::linalg::sum_with(prec, zeta.iter().cloned());
    let hs_bound = zeta_sum * ((mu + 1) as f64 / 2.0) / delta.powi(2 * mu as i32);
    let k_upper = &pi.scaled_trace * &hs_norm_sq * 4.0;
    let limiting_ratio = matches!(obj.kind(), ObjectKind::Gaussian).then(|| (ratio_sq * 2.0).to_f64());
    Ok(TailReport {
        mu,
        w: w.clone(),
        zeta_ratios: ratios(&zeta),
        hs_ratios: ratios(&hs_terms),
        orders,
        lambda,
        zeta,
        eta,
        hs_terms,
        hs_norm_sq,
        hs_bound,
        k_upper,
        limiting_ratio,
    })
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
    fn gaussian_gaussian_ratio_approaches_limit() {
        let obj = ObjectModel::gaussian(real(0.1)).unwrap();
        let otf = OtfModel::gaussian(real(1.0)).unwrap();
        let p = BoundPipeline::new(&obj, &otf, 41, Some(real(0.4)), DEFAULT_RTOL).unwrap();
        let d = p.derivative(2).unwrap();
        let rep = tail_diagnostics(&p.pi, &p.pair, &d, &obj, &otf).unwrap();
        let limit = rep.limiting_ratio.unwrap();
        assert!((limit - 0.125).abs() < 1e-12);
        let i = rep.orders.iter().position(|&q| q == 40).unwrap();
        assert!((rep.hs_ratios[i] / limit - 1.0).abs() < 0.05, "{}", rep.hs_ratios[i]);
        // ζ converges more slowly but from above.
        assert!(rep.zeta_ratios[i] > limit);
    }

    #[test]
    fn uniform_ratio_decays() {
        let obj = ObjectModel::uniform(real(0.1)).unwrap();
        let otf = OtfModel::gaussian(real(1.0)).unwrap();
        let p = BoundPipeline::new(&obj, &otf, 24, Some(real(0.5)), DEFAULT_RTOL).unwrap();
        let d = p.derivative(2).unwrap();
        let rep = tail_diagnostics(&p.pi, &p.pair, &d, &obj, &otf).unwrap();
        let r = &rep.zeta_ratios;
        assert!(r[r.len() - 1] < r[r.len() / 2]);
        // (q+1) times the ratio levels off, i.e. the ratio decays like 1/(q+1).
        let scaled = |i: usize| r[i] * (rep.orders[i] as f64 + 1.0);
        let (mid, last) = (scaled(r.len() / 2), scaled(r.len() - 1));
        assert!((last / mid - 1.0).abs() < 0.2, "{mid} {last}");
    }

    #[test]
    fn bound_dominates_k_tilde() {
        let obj = ObjectModel::gaussian(real(0.1)).unwrap();
        let otf = OtfModel::gaussian(real(1.0)).unwrap();
        let p = BoundPipeline::new(&obj, &otf, 20, None, DEFAULT_RTOL).unwrap();
        for mu in 1..=4 {
            let d = p.derivative(mu).unwrap();
            let rep = tail_diagnostics(&p.pi, &p.pair, &d, &obj, &otf).unwrap();
            let k = p.k_tilde(mu, mu).unwrap().value;
            assert!(k <= rep.k_upper);
            assert!(rep.hs_norm_sq <= rep.hs_bound);
        }
    }

    #[test]
    fn outside_window_is_rejected() {
        let obj = ObjectModel::gaussian(real(0.1)).unwrap();
        let otf = OtfModel::gaussian(real(1.0)).unwrap();
        let p = BoundPipeline::new(&obj, &otf, 10, Some(real(0.1)), DEFAULT_RTOL).unwrap();
        let d = p.derivative(2).unwrap();
        assert!(matches!(
            tail_diagnostics(&p.pi, &p.pair, &d, &obj, &otf),
            Err(Error::OutsideWindow { .. })
        ));
    }
}
