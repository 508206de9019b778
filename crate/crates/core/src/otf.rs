//! OTF models, their even moments and the matrix Π.

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{quad_integrate, Precision, QuadDomain, Real, SymMatrix};
use crate::table::{read_two_column, Samples};

#[derive(Clone, Debug)]
pub enum OtfKind {
    Gaussian,
    /// `|Ψ(k)|² = 1/(2β)` on `[-β, β]`.
    Flat,
    /// Tabulated `|Ψ(k)|²`, renormalized on load. Convergence of Π̃ is not verified.
    Custom(Samples),
}

#[derive(Clone, Debug)]
pub struct OtfModel {
    kind: OtfKind,
    beta: Real,
}

impl OtfModel {
    fn build(kind: OtfKind, beta: Real) -> Result<Self> {
        if !beta.is_positive() || !beta.is_finite() {
            return Err(Error::InvalidInput("beta must be positive".into()));
        }
        Ok(OtfModel { kind, beta })
    }

    pub fn gaussian(beta: Real) -> Result<Self> {
        Self::build(OtfKind::Gaussian, beta)
    }

    pub fn flat(beta: Real) -> Result<Self> {
        Self::build(OtfKind::Flat, beta)
    }

    /// Custom table of `(k, |Ψ|²)`; β is set to the RMS width.
    pub fn custom(samples: &Samples) -> Result<Self> {
        let m = samples.power_integrals(2);
        if !m[0].is_positive() {
            return Err(Error::Table("OTF table has zero mass".into()));
        }
        let y = samples.y.iter().map(|v| v / &m[0]).collect();
        let s = Samples::new(samples.x.clone(), y)?;
        let beta = (&m[2] / &m[0]).sqrt();
        Self::build(OtfKind::Custom(s), beta)
    }

    pub fn custom_from_csv(path: &Path, prec: Precision) -> Result<Self> {
        Self::custom(&read_two_column(path, ["k", "psi2"], prec)?)
    }

    pub fn kind(&self) -> &OtfKind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            OtfKind::Gaussian => "gaussian",
            OtfKind::Flat => "flat",
            OtfKind::Custom(_) => "custom",
        }
    }

    pub fn beta(&self) -> &Real {
        &self.beta
    }

    pub fn precision(&self) -> Precision {
        self.beta.precision()
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.kind, OtfKind::Gaussian)
    }

    /// True when the convergence conditions on Π̃ are known to hold for this kind.
    pub fn verified(&self) -> bool {
        !matches!(self.kind, OtfKind::Custom(_))
    }

    /// `⟨k²⟩ - ⟨k⟩²`.
    pub fn variance(&self) -> Real {
        let prec = self.precision();
        match &self.kind {
            OtfKind::Custom(s) => {
                let m = s.power_integrals(2);
                &m[2] - m[1].square()
            }
            _ => otf_moments(self, 1).pop().unwrap_or_else(|| Real::zero(prec)),
        }
    }

    /// `|Ψ(k)|²`.
    pub fn density(&self, k: &Real) -> Real {
        let prec = self.precision();
        match &self.kind {
            OtfKind::Gaussian => {
                let z = k / &self.beta;
                (-(z.square()) / 2.0).exp() / ((Real::pi(prec) * 2.0).sqrt() * &self.beta)
            }
            OtfKind::Flat => {
                if k.abs() <= self.beta {
                    (&self.beta * 2.0).recip()
                } else {
                    Real::zero(prec)
                }
            }
            OtfKind::Custom(s) => s.interpolate(k),
        }
    }
}

/// Even OTF moments `⟨k^(2q)⟩` for q = 0..=q_max.
pub fn otf_moments(otf: &OtfModel, q_max: usize) -> Vec<Real> {
    let prec = otf.precision();
    let b2 = otf.beta.square();
    match &otf.kind {
        OtfKind::Gaussian => {
            // (2q)!/(q! 2^q) = (2q-1)!!
            let mut out = Vec::with_capacity(q_max + 1);
            let mut term = Real::one(prec);
            for q in 0..=q_max {
                if q > 0 {
                    term = term * &b2 * ((2 * q - 1) as f64);
                }
                out.push(term.clone());
            }
            out
        }
        OtfKind::Flat => {
            let mut out = Vec::with_capacity(q_max + 1);
            let mut pow = Real::one(prec);
            for q in 0..=q_max {
                if q > 0 {
                    pow *= &b2;
                }
                out.push(&pow / ((2 * q + 1) as f64));
            }
            out
        }
        OtfKind::Custom(s) => {
            let all = s.power_integrals(2 * q_max);
            all.into_iter().step_by(2).collect()
        }
    }
}

/// Same moment by quadrature, used to cross-check the closed forms.
pub fn otf_moment_quadrature(otf: &OtfModel, power: usize) -> Result<Real> {
    let prec = otf.precision();
    let f = |k: &Real| k.powi(power as i32);
    match &otf.kind {
        OtfKind::Gaussian => Ok(quad_integrate(
            f,
            &QuadDomain::Gaussian {
                std_dev: otf.beta.clone(),
            },
            crate::linalg::quad::DEFAULT_ORDER,
            prec,
        )?
        .value),
        OtfKind::Flat => {
            let domain = QuadDomain::Interval {
                lower: -otf.beta.clone(),
                upper: otf.beta.clone(),
            };
            let v = quad_integrate(f, &domain, crate::linalg::quad::DEFAULT_ORDER, prec)?.value;
            Ok(v / (&otf.beta * 2.0))
        }
        OtfKind::Custom(s) => Ok(s.power_integrals(power).pop().expect("non-empty")),
    }
}

#[derive(Clone, Debug)]
pub struct PiMatrix {
    pub q_max: usize,
    /// `Π_pq = (-1)^((p-q)/2) m_(p+q) / (p! q!)`, zero for odd `p+q`.
    pub pi: SymMatrix,
    pub w: Real,
    /// `Π̃ = W Π W`, `W = diag(w^q √(q!))`.
    pub scaled: SymMatrix,
    pub scaled_trace: Real,
}

fn factorials(n: usize, prec: Precision) -> Vec<Real> {
    let mut out = vec![Real::one(prec)];
    for k in 1..=n {
        let next = &out[k - 1] * (k as f64);
        out.push(next);
    }
    out
}

fn pi_entries(moments: &[Real], q_max: usize, fact: &[Real]) -> SymMatrix {
    let prec = moments[0].precision();
    SymMatrix::from_fn(q_max + 1, |p, q| {
        if (p + q) % 2 == 1 {
            return Real::zero(prec);
        }
        let v = &moments[(p + q) / 2] / (&fact[p] * &fact[q]);
        // p >= q here; i^(p-q) = (-1)^((p-q)/2)
        if ((p - q) / 2) % 2 == 1 {
            -v
        } else {
            v
        }
    })
}

pub fn pi_matrix(otf: &OtfModel, q_max: usize, w: &Real) -> Result<PiMatrix> {
    if !w.is_positive() {
        return Err(Error::InvalidInput("w must be positive".into()));
    }
    let prec = otf.precision();
    let moments = otf_moments(otf, q_max);
    let fact = factorials(q_max, prec);
    let pi = pi_entries(&moments, q_max, &fact);
    let scale: Vec<Real> = (0..=q_max)
        .map(|q| w.powi(q as i32) * fact[q].sqrt())
        .collect();
    let scaled = SymMatrix::from_fn(q_max + 1, |p, q| &scale[p] * &pi[(p, q)] * &scale[q]);
    let scaled_trace = scaled.trace();
    Ok(PiMatrix {
        q_max,
        pi,
        w: w.clone(),
        scaled,
        scaled_trace,
    })
}

/// Π entry by quadrature of `i^(p-q) k^(p+q) / (p! q!)` against `|Ψ|²`.
pub fn pi_entry_quadrature(otf: &OtfModel, p: usize, q: usize) -> Result<Real> {
    let prec = otf.precision();
    if (p + q) % 2 == 1 {
        return Ok(Real::zero(prec));
    }
    let m = otf_moment_quadrature(otf, p + q)?;
    let fact = factorials(p.max(q), prec);
    let v = m / (&fact[p] * &fact[q]);
    let exponent = (p as i64 - q as i64).abs() / 2;
    Ok(if exponent % 2 == 1 { -v } else { v })
}

/// Closed-form `tr Π̃ = 1/√(1 - 2w²β²)` for a gaussian OTF; `None` if the series diverges.
pub fn gaussian_scaled_trace(beta: &Real, w: &Real) -> Option<Real> {
    let x = (w * beta).square() * 2.0;
    if x >= 1.0 {
        return None;
    }
    Some((Real::one(x.precision()) - x).sqrt().recip())
}

#[derive(Clone, Debug)]
pub struct TraceCheck {
    pub converged: bool,
    pub value: Real,
    /// Whether the convergence statement is backed by a known condition.
    pub verified: bool,
    /// `(√2 Δ, 1/(√2 β))` for a gaussian OTF when Δ is given.
    pub window: Option<(Real, Real)>,
    /// `βΔ < 1/2`
    pub feasible: Option<bool>,
}

/// Admissible range of `w` for a gaussian object of width Δ and a gaussian OTF.
pub fn w_window(delta: &Real, beta: &Real) -> (Real, Real) {
    let sqrt2 = Real::from_int(2, delta.precision()).sqrt();
    (delta * &sqrt2, (beta * &sqrt2).recip())
}

pub fn pi_trace_check(pi: &PiMatrix, otf: &OtfModel, delta: Option<&Real>) -> TraceCheck {
    let sqrt2 = Real::from_int(2, pi.w.precision()).sqrt();
    let converged = match otf.kind {
        OtfKind::Gaussian => pi.w < (otf.beta() * &sqrt2).recip(),
        // Compact support: the series converges for any w.
        OtfKind::Flat | OtfKind::Custom(_) => true,
    };
    let (window, feasible) = match (otf.is_gaussian(), delta) {
        (true, Some(d)) => {
            let (lo, hi) = w_window(d, otf.beta());
            // Decided on βΔ directly so the boundary case is not left to rounding.
            let feasible = otf.beta() * d < 0.5;
            (Some((lo, hi)), Some(feasible))
        }
        _ => (None, None),
    };
    TraceCheck {
        converged,
        value: pi.scaled_trace.clone(),
        verified: otf.verified(),
        window,
        feasible,
    }
}

/// `√(Δ/β)` (geometric mean of the window) when object and OTF are both
/// gaussian, `1/(2β)` for other objects behind a gaussian OTF, otherwise 1.
pub fn default_w(object_is_gaussian: bool, otf: &OtfModel, delta: &Real) -> Real {
    if object_is_gaussian && otf.is_gaussian() {
        (delta / otf.beta()).sqrt()
    } else if otf.is_gaussian() {
        (otf.beta() * 2.0).recip()
    } else {
        Real::one(delta.precision())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eigen;

    fn prec() -> Precision {
        Precision::default()
    }

    fn real(x: f64) -> Real {
        Real::from_f64(x, prec())
    }

    #[test]
    fn gaussian_fourth_moment() {
        let m = otf_moments(&OtfModel::gaussian(real(1.0)).unwrap(), 2);
        assert_eq!(m[2], 3.0);
    }

    #[test]
    fn flat_second_moment() {
        let m = otf_moments(&OtfModel::flat(real(1.0)).unwrap(), 1);
        assert_eq!(m[1], Real::from_ratio(1, 3, prec()));
    }

    #[test]
    fn zeroth_moment_is_one() {
        assert_eq!(otf_moments(&OtfModel::gaussian(real(0.7)).unwrap(), 0)[0], 1.0);
        assert_eq!(otf_moments(&OtfModel::flat(real(0.7)).unwrap(), 0)[0], 1.0);
    }

    #[test]
    fn pi_entries_for_gaussian() {
        let beta = real(1.3);
        let pi = pi_matrix(&OtfModel::gaussian(beta.clone()).unwrap(), 3, &real(1.0)).unwrap();
        assert_eq!(pi.pi[(0, 2)], -(beta.square()) / 2.0);
        assert!(pi.pi[(0, 1)].is_zero());
        assert!(pi.pi[(1, 2)].is_zero());
    }

    #[test]
    fn gaussian_scaled_trace_closed_form() {
        let p = Precision::default();
        let otf = OtfModel::gaussian(Real::one(p)).unwrap();
        let w = Real::from_ratio(1, 2, p);
        let pi = pi_matrix(&otf, 100, &w).unwrap();
        let expected = Real::from_ratio(1, 2, p).sqrt().recip();
        assert_eq!(gaussian_scaled_trace(otf.beta(), &w).unwrap(), expected);
        assert!((&pi.scaled_trace - &expected).abs() < &expected * 1e-20);
    }

    #[test]
    fn scaled_trace_at_sixty_orders() {
        let otf = OtfModel::gaussian(real(1.0)).unwrap();
        let w = real(0.4);
        let pi = pi_matrix(&otf, 60, &w).unwrap();
        let expected = gaussian_scaled_trace(otf.beta(), &w).unwrap();
        assert!((&pi.scaled_trace - &expected).abs() < &expected * 1e-20);
    }

    #[test]
    fn pi_is_positive_semidefinite() {
        for otf in [
            OtfModel::gaussian(real(1.0)).unwrap(),
            OtfModel::flat(real(1.0)).unwrap(),
        ] {
            let pi = pi_matrix(&otf, 12, &real(1.0)).unwrap();
            let eig = sym_eigen(&pi.pi).unwrap();
            assert!(eig.values[0] > -1e-60, "{}", eig.values[0].to_f64());
        }
    }

    #[test]
    fn quadrature_matches_closed_form_entries() {
        for otf in [
            OtfModel::gaussian(real(1.0)).unwrap(),
            OtfModel::flat(real(0.8)).unwrap(),
        ] {
            let pi = pi_matrix(&otf, 8, &real(1.0)).unwrap();
            for p in 0..=8 {
                for q in 0..=p {
                    let quad = pi_entry_quadrature(&otf, p, q).unwrap();
                    assert!(
                        (&quad - &pi.pi[(p, q)]).abs() < 1e-25,
                        "{} ({p},{q})",
                        otf.kind_name()
                    );
                }
            }
        }
    }

    #[test]
    fn trace_check_gaussian_divergent() {
        let otf = OtfModel::gaussian(real(1.0)).unwrap();
        let pi = pi_matrix(&otf, 10, &real(0.8)).unwrap();
        assert!(!pi_trace_check(&pi, &otf, None).converged);
    }

    #[test]
    fn trace_check_window() {
        let otf = OtfModel::gaussian(real(1.0)).unwrap();
        let pi = pi_matrix(&otf, 10, &real(0.3)).unwrap();
        let check = pi_trace_check(&pi, &otf, Some(&real(0.1)));
        let (lo, hi) = check.window.unwrap();
        assert!((lo.to_f64() - 0.1414213562373095).abs() < 1e-15);
        assert!((hi.to_f64() - 0.7071067811865476).abs() < 1e-15);
        assert_eq!(check.feasible, Some(true));
        let infeasible = pi_trace_check(&pi, &otf, Some(&real(0.5)));
        assert_eq!(infeasible.feasible, Some(false));
    }

    #[test]
    fn trace_check_flat_always_converges() {
        let otf = OtfModel::flat(real(1.0)).unwrap();
        for w in [0.5, 3.0, 50.0] {
            let pi = pi_matrix(&otf, 10, &real(w)).unwrap();
            assert!(pi_trace_check(&pi, &otf, None).converged);
        }
    }

    #[test]
    fn default_w_is_window_midpoint() {
        let otf = OtfModel::gaussian(real(1.0)).unwrap();
        let w = default_w(true, &otf, &real(0.09));
        assert!((w.to_f64() - 0.3).abs() < 1e-15);
        assert_eq!(default_w(false, &otf, &real(0.09)), 0.5);
        assert_eq!(default_w(false, &OtfModel::flat(real(1.0)).unwrap(), &real(0.09)), 1.0);
    }

    #[test]
    fn custom_table_is_renormalized() {
        let p = prec();
        let x: Vec<Real> = (0..=200).map(|i| Real::from_f64(-1.0 + i as f64 / 100.0, p)).collect();
        let y = x.iter().map(|_| Real::from_int(3, p)).collect();
        let otf = OtfModel::custom(&Samples::new(x, y).unwrap()).unwrap();
        let m = otf_moments(&otf, 1);
        assert!((&m[0] - 1.0).abs() < p.tolerance(16));
        assert!((&m[1] - Real::from_ratio(1, 3, p)).abs() < p.tolerance(16));
        assert!(!otf.verified());
    }
}
