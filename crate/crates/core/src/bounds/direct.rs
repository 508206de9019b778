use crate::error::{Error, Result};
use crate::linalg::Real;
use crate::moments::{moment_sequence, ObjectModel};
use crate::otf::OtfModel;

pub const DIRECT_GRID_POINTS: usize = 8192;
/// Half-width of the integration grid in PSF standard deviations.
pub const DIRECT_GRID_WIDTH: f64 = 8.0;

#[derive(Clone, Debug)]
pub struct DirectFisher {
    pub mu: usize,
    /// `J_μμ` for `N` photons.
    pub value: Real,
    /// Highest moment kept in the image expansion.
    pub truncation: usize,
}

/// Fisher information of direct imaging for θ_μ with a gaussian PSF.
///
/// The image is `P(x) = Σ_ν θ_ν He_ν(x/σ) h(x) / (σ^ν ν!)`, `h` the
/// intensity PSF with `σ = 1/(2β)`, truncated at `ν = truncation`. The
/// integral `N ∫ (∂P/∂θ_μ)² / P dx` is taken by the trapezoid rule.
pub fn direct_imaging_fisher(
    obj: &ObjectModel,
    otf: &OtfModel,
    mu: usize,
    photons: &Real,
    truncation: usize,
) -> Result<DirectFisher> {
    if !otf.is_gaussian() {
        return Err(Error::InvalidInput("direct imaging needs a gaussian OTF".into()));
    }
    if mu > truncation {
        return Err(Error::InsufficientOrder {
            needed: mu,
            available: truncation,
        });
    }
    let prec = obj.precision();
    let theta = moment_sequence(obj, truncation)?.theta;
    let sigma = (otf.beta() * 2.0).recip();
    // θ_ν / (σ^ν ν!)
    let mut coeff = Vec::with_capacity(truncation + 1);
    let mut scale = Real::one(prec);
    for (nu, t) in theta.iter().enumerate() {
        if nu > 0 {
            scale = scale * &sigma * (nu as f64);
        }
        coeff.push(t / &scale);
    }
    let d_scale = sigma.powi(mu as i32) * Real::factorial(mu as u32, prec);
    let norm = (Real::pi(prec) * 2.0).sqrt() * &sigma;
    let half = Real::from_f64(DIRECT_GRID_WIDTH, prec) * &sigma;
    let step = &half * 2.0 / ((DIRECT_GRID_POINTS - 1) as f64);
    let u_step = Real::from_f64(2.0 * DIRECT_GRID_WIDTH, prec) / ((DIRECT_GRID_POINTS - 1) as f64);
    let mut acc = Real::zero(prec);
    let mut he = vec![Real::zero(prec); truncation + 1];
    for i in 0..DIRECT_GRID_POINTS {
        let u = Real::from_f64(-DIRECT_GRID_WIDTH, prec) + &u_step * (i as f64);
        he[0] = Real::one(prec);
        if truncation >= 1 {
            he[1] = u.clone();
        }
        for n in 1..truncation {
            he[n + 1] = &u * &he[n] - &he[n - 1] * (n as f64);
        }
        let c = crate::linalg::sum_with(prec, coeff.iter().zip(&he).map(|(a, b)| a * b));
        if !c.is_positive() {
            return Err(Error::NegativeIntensity((&u * &sigma).to_f64()));
        }
        let h = (-(u.square()) / 2.0).exp() / &norm;
        let dp = &he[mu] / &d_scale;
        let mut term = h * dp.square() / c;
        if i == 0 || i == DIRECT_GRID_POINTS - 1 {
            term /= 2.0;
        }
        acc += term;
    }
    Ok(DirectFisher {
        mu,
        value: acc * step * photons,
        truncation,
    })
}
