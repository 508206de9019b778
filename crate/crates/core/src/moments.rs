//! Object models, moment sequences, Hankel matrices and the asymptotics of
//! their smallest eigenvalues.
//!
//! Coordinates are normalized twice: object-plane positions are already in
//! units of the inverse OTF bandwidth, and every model is described by a
//! Δ-independent density `f(x)` with `X = Δ x`. Conventions: the gaussian
//! model has unit normalized variance (`φ_2 = 1`) and the uniform model is
//! supported on `[-1, 1]` (`φ_2 = 1/3`).

use std::path::Path;

use crate::error::{Error, Result};
use crate::fit::linear_fit;
use crate::linalg::{chol, quad_integrate, sym_eigen, Precision, QuadDomain, QuadResult, Real, SymMatrix};
use crate::table::{read_two_column, Samples};

pub const DEFAULT_TABLE_RESOLUTION: usize = 4096;
/// Allowed deviation of a table density's integral from one before it is rejected.
pub const TABLE_NORMALIZATION_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub enum ObjectKind {
    Gaussian,
    Uniform,
    /// Point sources at normalized positions with positive weights summing to one.
    Points { positions: Vec<Real>, weights: Vec<Real> },
    /// Piecewise-linear density on a uniform grid with compact support.
    Table(Samples),
}

#[derive(Clone, Debug)]
pub struct ObjectModel {
    kind: ObjectKind,
    delta: Real,
    /// Shift of the normalized density, `x -> x + center`.
    center: Real,
}

impl ObjectModel {
    fn build(kind: ObjectKind, delta: Real) -> Result<Self> {
        if !delta.is_positive() || !delta.is_finite() {
            return Err(Error::InvalidInput("delta must be positive".into()));
        }
        let center = Real::zero(delta.precision());
        Ok(ObjectModel { kind, delta, center })
    }

    pub fn gaussian(delta: Real) -> Result<Self> {
        Self::build(ObjectKind::Gaussian, delta)
    }

    pub fn uniform(delta: Real) -> Result<Self> {
        Self::build(ObjectKind::Uniform, delta)
    }

    pub fn points(positions: Vec<Real>, weights: Vec<Real>, delta: Real) -> Result<Self> {
        if positions.is_empty() || positions.len() != weights.len() {
            return Err(Error::InvalidInput(
                "point constellation needs matching, non-empty positions and weights".into(),
            ));
        }
        if weights.iter().any(|w| !w.is_positive()) {
            return Err(Error::InvalidInput("constellation weights must be positive".into()));
        }
        let prec = delta.precision();
        let total = crate::linalg::sum_with(prec, weights.iter().cloned());
        if (&total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "constellation weights must sum to 1 (got {})",
                total.to_f64()
            )));
        }
        let weights = weights.into_iter().map(|w| w / &total).collect();
        Self::build(ObjectKind::Points { positions, weights }, delta)
    }

    /// Table density from samples of the normalized `f(x)`, resampled onto a
    /// uniform grid of `resolution` points.
    pub fn table(samples: &Samples, resolution: usize, delta: Real) -> Result<Self> {
        let grid = samples.resample_uniform(resolution)?;
        let mass = grid.power_integrals(0).remove(0);
        if (&mass - 1.0).abs() > TABLE_NORMALIZATION_TOL {
            return Err(Error::QuadratureFailure(format!(
                "table density integrates to {} instead of 1",
                mass.to_f64()
            )));
        }
        let y = grid.y.iter().map(|v| v / &mass).collect();
        let grid = Samples::new(grid.x, y)?;
        Self::build(ObjectKind::Table(grid), delta)
    }

    pub fn table_from_csv(path: &Path, resolution: usize, delta: Real) -> Result<Self> {
        let samples = read_two_column(path, ["x", "f"], delta.precision())?;
        Self::table(&samples, resolution, delta)
    }

    /// Table density sampled from a closure over `[lower, upper]`.
    pub fn table_from_fn(
        lower: f64,
        upper: f64,
        resolution: usize,
        delta: Real,
        f: impl Fn(&Real) -> Real,
    ) -> Result<Self> {
        let prec = delta.precision();
        let lo = Real::from_f64(lower, prec);
        let step = (Real::from_f64(upper, prec) - &lo) / ((resolution - 1) as f64);
        let x: Vec<Real> = (0..resolution).map(|i| &lo + &step * (i as f64)).collect();
        let y = x.iter().map(&f).collect();
        Self::table(&Samples::new(x, y)?, resolution, delta)
    }

    pub fn with_center(mut self, center: Real) -> Self {
        self.center = center;
        self
    }

    /// Same density at a different width.
    pub fn with_delta(&self, delta: Real) -> Result<Self> {
        let mut m = Self::build(self.kind.clone(), delta)?;
        m.center = self.center.clone();
        Ok(m)
    }

    pub fn kind(&self) -> &ObjectKind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            ObjectKind::Gaussian => "gaussian",
            ObjectKind::Uniform => "uniform",
            ObjectKind::Points { .. } => "points",
            ObjectKind::Table(_) => "table",
        }
    }

    pub fn delta(&self) -> &Real {
        &self.delta
    }

    pub fn center(&self) -> &Real {
        &self.center
    }

    pub fn precision(&self) -> Precision {
        self.delta.precision()
    }

    /// Number of atoms for a constellation; `None` for infinite support.
    pub fn finite_support(&self) -> Option<usize> {
        match &self.kind {
            ObjectKind::Points { positions, .. } => Some(positions.len()),
            _ => None,
        }
    }

    /// Normalized support `[x1, x2]` for compactly supported densities.
    pub fn compact_support(&self) -> Option<(Real, Real)> {
        let (lo, hi) = match &self.kind {
            ObjectKind::Gaussian | ObjectKind::Points { .. } => return None,
            ObjectKind::Uniform => {
                let prec = self.precision();
                (Real::from_int(-1, prec), Real::one(prec))
            }
            ObjectKind::Table(s) => (s.x[0].clone(), s.x[s.x.len() - 1].clone()),
        };
        Some((lo + &self.center, hi + &self.center))
    }

    /// Normalized density `f(x)`; `None` for constellations.
    pub fn density(&self, x: &Real) -> Option<Real> {
        let prec = self.precision();
        let u = x - &self.center;
        match &self.kind {
            ObjectKind::Gaussian => {
                let norm = (Real::pi(prec) * 2.0).sqrt();
                Some((-(u.square()) / 2.0).exp() / norm)
            }
            ObjectKind::Uniform => {
                if u.abs() <= 1.0 {
                    Some(Real::from_ratio(1, 2, prec))
                } else {
                    Some(Real::zero(prec))
                }
            }
            ObjectKind::Table(s) => Some(s.interpolate(&u)),
            ObjectKind::Points { .. } => None,
        }
    }

    /// Centered normalized moments `E[x^k]` before the center shift.
    fn base_moments(&self, max: usize) -> Vec<Real> {
        let prec = self.precision();
        match &self.kind {
            ObjectKind::Gaussian => {
                let mut out = Vec::with_capacity(max + 1);
                let mut double_fact = Real::one(prec);
                for mu in 0..=max {
                    if mu % 2 == 1 {
                        out.push(Real::zero(prec));
                    } else {
                        if mu >= 2 {
                            double_fact *= (mu - 1) as f64;
                        }
                        out.push(double_fact.clone());
                    }
                }
                out
            }
            ObjectKind::Uniform => (0..=max)
                .map(|mu| {
                    if mu % 2 == 1 {
                        Real::zero(prec)
                    } else {
                        Real::from_ratio(1, mu as i64 + 1, prec)
                    }
                })
                .collect(),
            ObjectKind::Points { positions, weights } => {
                let mut out = vec![Real::zero(prec); max + 1];
                for (x, w) in positions.iter().zip(weights) {
                    let mut p = w.clone();
                    for slot in out.iter_mut() {
                        *slot += &p;
                        p *= x;
                    }
                }
                out
            }
            ObjectKind::Table(s) => s.power_integrals(max),
        }
    }
}

/// Moments of an object: normalized `φ_μ` and physical `θ_μ = φ_μ Δ^μ`.
#[derive(Clone, Debug)]
pub struct MomentVector {
    pub phi: Vec<Real>,
    pub theta: Vec<Real>,
    /// `Δ^μ` for μ = 0..=μ_max.
    pub delta_powers: Vec<Real>,
}

impl MomentVector {
    pub fn max_order(&self) -> usize {
        self.phi.len() - 1
    }
}

fn binomial_row(n: usize, prec: Precision) -> Vec<Real> {
    let mut row = vec![Real::one(prec)];
    for k in 1..=n {
        let prev = row[k - 1].clone();
        row.push(prev * ((n - k + 1) as f64) / (k as f64));
    }
    row
}

pub fn moment_sequence(obj: &ObjectModel, mu_max: usize) -> Result<MomentVector> {
    let prec = obj.precision();
    let base = obj.base_moments(mu_max);
    let mut phi = if obj.center.is_zero() {
        base
    } else {
        // E[(x + c)^μ] = Σ_k C(μ,k) c^(μ-k) E[x^k]
        let c = &obj.center;
        (0..=mu_max)
            .map(|mu| {
                let binom = binomial_row(mu, prec);
                let mut acc = Real::zero(prec);
                for k in 0..=mu {
                    acc += &binom[k] * c.powi((mu - k) as i32) * &base[k];
                }
                acc
            })
            .collect()
    };
    phi[0] = Real::one(prec);
    let delta_powers: Vec<Real> = (0..=mu_max).map(|mu| obj.delta.powi(mu as i32)).collect();
    let theta = phi.iter().zip(&delta_powers).map(|(p, d)| p * d).collect();
    Ok(MomentVector {
        phi,
        theta,
        delta_powers,
    })
}

/// Physical and normalized Hankel matrices of one object.
#[derive(Clone, Debug)]
pub struct HankelSet {
    pub q_max: usize,
    /// `Θ_qp = θ_(q+p)`
    pub theta: SymMatrix,
    /// `Ξ_qp = φ_(q+p)`
    pub xi: SymMatrix,
    /// Diagonal of `D`, `D_qq = Δ^q`.
    pub scaling: Vec<Real>,
    pub delta: Real,
    pub positive_definite: bool,
}

pub fn hankel(moments: &MomentVector, q_max: usize) -> Result<HankelSet> {
    if 2 * q_max > moments.max_order() {
        return Err(Error::InsufficientOrder {
            needed: 2 * q_max,
            available: moments.max_order(),
        });
    }
    let n = q_max + 1;
    let theta = SymMatrix::from_fn(n, |q, p| moments.theta[q + p].clone());
    let xi = SymMatrix::from_fn(n, |q, p| moments.phi[q + p].clone());
    let positive_definite = chol(&theta).is_ok();
    let delta = if moments.max_order() >= 1 {
        moments.delta_powers[1].clone()
    } else {
        Real::one(moments.phi[0].precision())
    };
    Ok(HankelSet {
        q_max,
        theta,
        xi,
        scaling: moments.delta_powers[..n].to_vec(),
        delta,
        positive_definite,
    })
}

/// Convenience: moments to order `2 q_max` and their Hankel set.
pub fn object_hankel(obj: &ObjectModel, q_max: usize) -> Result<HankelSet> {
    hankel(&moment_sequence(obj, 2 * q_max)?, q_max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SzegoModel {
    /// `λ_q ~ Ω √q τ^q`
    CompactSupport,
    /// `λ_q ~ Ω q^(1/4) τ^(√q)`
    Gaussian,
}

#[derive(Clone, Debug)]
pub struct SzegoFit {
    pub orders: Vec<usize>,
    /// Smallest eigenvalue of the leading `(q+1) x (q+1)` block of Ξ.
    pub lambda: Vec<Real>,
    pub omega: f64,
    pub tau: f64,
    /// RMS residual of the fit in `ln λ`.
    pub residual: f64,
    pub model: SzegoModel,
}

/// Smallest eigenvalues of `Ξ_(q)` for each requested `q`, guarded against
/// precision exhaustion (`λ_q > 2^(-bits/2)`).
pub fn hankel_smallest_eigenvalues(obj: &ObjectModel, orders: &[usize]) -> Result<Vec<Real>> {
    if let Some(atoms) = obj.finite_support() {
        return Err(Error::FiniteSupport { atoms });
    }
    let q_top = orders.iter().copied().max().unwrap_or(0);
    let h = object_hankel(obj, q_top)?;
    let prec = obj.precision();
    let guard = prec.pow2(-((prec.bits() / 2) as i32));
    orders
        .iter()
        .map(|&q| {
            let eig = sym_eigen(&h.xi.leading(q + 1))?;
            let lambda = eig.values[0].clone();
            if lambda <= guard {
                return Err(Error::PrecisionExhausted {
                    q,
                    value: lambda.to_f64(),
                });
            }
            Ok(lambda)
        })
        .collect()
}

/// Fits `ln λ_q` to the asymptotic form matching the object's class.
pub fn szego_fit(obj: &ObjectModel, q_lo: usize, q_hi: usize) -> Result<SzegoFit> {
    if q_hi < q_lo || q_hi - q_lo + 1 < 8 {
        return Err(Error::InvalidInput(format!(
            "the fit needs at least 8 orders, got [{q_lo}, {q_hi}]"
        )));
    }
    let model = match obj.kind() {
        ObjectKind::Gaussian => SzegoModel::Gaussian,
        ObjectKind::Uniform | ObjectKind::Table(_) => SzegoModel::CompactSupport,
        ObjectKind::Points { positions, .. } => {
            return Err(Error::FiniteSupport {
                atoms: positions.len(),
            })
        }
    };
    let orders: Vec<usize> = (q_lo..=q_hi).collect();
    let lambda = hankel_smallest_eigenvalues(obj, &orders)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = orders
        .iter()
        .zip(&lambda)
        .map(|(&q, l)| {
            let qf = q as f64;
            let ln_l = l.ln().to_f64();
            match model {
                SzegoModel::CompactSupport => (qf, ln_l - 0.5 * qf.ln()),
                SzegoModel::Gaussian => (qf.sqrt(), ln_l - 0.25 * qf.ln()),
            }
        })
        .unzip();
    let line = linear_fit(&xs, &ys);
    Ok(SzegoFit {
        orders,
        lambda,
        omega: line.intercept.exp(),
        tau: line.slope.exp(),
        residual: line.rms,
        model,
    })
}

/// `S = ∫ ln f(x) / sqrt((x - x1)(x2 - x)) dx` over the compact support,
/// evaluated after `x = mid + half cos ϑ`, which turns it into `∫_0^π ln f dϑ`.
pub fn szego_integral(obj: &ObjectModel) -> Result<QuadResult> {
    let prec = obj.precision();
    let (lo, hi) = obj.compact_support().ok_or_else(|| {
        Error::InvalidInput("the Szego integral needs a compactly supported density".into())
    })?;
    if let ObjectKind::Table(s) = obj.kind() {
        if let Some(i) = s.y.iter().position(|v| !v.is_positive()) {
            return Err(Error::NotInClass((&s.x[i] + &obj.center).to_f64()));
        }
    }
    let mid = (&lo + &hi) / 2.0;
    let half = (&hi - &lo) / 2.0;
    let domain = QuadDomain::Interval {
        lower: Real::zero(prec),
        upper: Real::pi(prec),
    };
    quad_integrate(
        |t| {
            // Clamp to the support so rounding at ϑ = 0, π stays inside.
            let x = (&mid + &half * t.cos()).max(lo.clone()).min(hi.clone());
            obj.density(&x).expect("compact support implies a density").ln()
        },
        &domain,
        crate::linalg::quad::DEFAULT_ORDER,
        prec,
    )
}
