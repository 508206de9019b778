use crate::error::{Error, Result};
use crate::linalg::{Real, SymMatrix};
use crate::moments::{moment_sequence, ObjectKind, ObjectModel};
use crate::otf::OtfModel;

/// Error bounds for a point constellation with known weights (convexity) or
/// unknown weights (classical simulation).
#[derive(Clone, Debug)]
pub struct ConstellationBounds {
    pub weights: Vec<Real>,
    /// Physical positions `X_s = Δ x_s`.
    pub positions: Vec<Real>,
    /// `⟨k²⟩ - ⟨k⟩²`
    pub beta_sq: Real,
    /// Diagonal of `G`, `4 F_s β²`.
    pub g: Vec<Real>,
    theta: Vec<Real>,
}

impl ConstellationBounds {
    pub fn new(obj: &ObjectModel, otf: &OtfModel, mu_max: usize) -> Result<Self> {
        let ObjectKind::Points { positions, weights } = obj.kind() else {
            return Err(Error::InvalidInput("constellation bounds need a point object".into()));
        };
        let beta_sq = otf.variance();
        if !beta_sq.is_positive() {
            return Err(Error::ZeroVariance);
        }
        let positions: Vec<Real> = positions.iter().map(|x| (x + obj.center()) * obj.delta()).collect();
        let g = weights.iter().map(|f| f * &beta_sq * 4.0).collect();
        let theta = moment_sequence(obj, 2 * mu_max)?.theta;
        Ok(ConstellationBounds {
            weights: weights.clone(),
            positions,
            beta_sq,
            g,
            theta,
        })
    }

    fn theta(&self, k: usize) -> Result<&Real> {
        self.theta.get(k).ok_or(Error::InsufficientOrder {
            needed: k,
            available: self.theta.len() - 1,
        })
    }

    /// `H_μs = F_s μ X_s^(μ-1)`
    pub fn h(&self, mu: usize, s: usize) -> Real {
        let prec = self.beta_sq.precision();
        if mu == 0 {
            return Real::zero(prec);
        }
        &self.weights[s] * (mu as f64) * self.positions[s].powi(mu as i32 - 1)
    }

    /// `R_μs = X_s^μ`
    pub fn r(&self, mu: usize, s: usize) -> Real {
        self.positions[s].powi(mu as i32)
    }

    /// `H G^-1 H^T` over the given orders.
    pub fn convexity_matrix(&self, mus: &[usize]) -> SymMatrix {
        let prec = self.beta_sq.precision();
        SymMatrix::from_fn(mus.len(), |i, j| {
            let mut acc = Real::zero(prec);
            for s in 0..self.weights.len() {
                acc += self.h(mus[i], s) * self.h(mus[j], s) / &self.g[s];
            }
            acc
        })
    }

    /// `R J^(F)-1 R^T` with `J^(F) = diag(1/F_s)`.
    pub fn classical_matrix(&self, mus: &[usize]) -> SymMatrix {
        let prec = self.beta_sq.precision();
        SymMatrix::from_fn(mus.len(), |i, j| {
            let mut acc = Real::zero(prec);
            for s in 0..self.weights.len() {
                acc += self.r(mus[i], s) * self.r(mus[j], s) * &self.weights[s];
            }
            acc
        })
    }

    /// `(H G^-1 H^T)_μμ / N`, from the matrices.
    pub fn convexity_bound(&self, mu: usize, photons: &Real) -> Real {
        &self.convexity_matrix(&[mu])[(0, 0)] / photons
    }

    /// `μ² θ_(2μ-2) / (4 N β²)`
    pub fn convexity_closed_form(&self, mu: usize, photons: &Real) -> Result<Real> {
        if mu == 0 {
            return Ok(Real::zero(self.beta_sq.precision()));
        }
        Ok(self.theta(2 * mu - 2)? * ((mu * mu) as f64) / (&self.beta_sq * photons * 4.0))
    }

    /// `(R J^(F)-1 R^T)_μμ / N`, from the matrices.
    pub fn classical_sim_bound(&self, mu: usize, photons: &Real) -> Real {
        &self.classical_matrix(&[mu])[(0, 0)] / photons
    }

    /// `θ_2μ / N`
    pub fn classical_sim_closed_form(&self, mu: usize, photons: &Real) -> Result<Real> {
        Ok(self.theta(2 * mu)? / photons)
    }
}
