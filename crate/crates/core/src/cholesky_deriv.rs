//! Cholesky factors of moment Hankel matrices and their derivatives with
//! respect to a single moment θ_μ.
//!
//! Everything is truncated at `q_max`. Because the factor is lower
//! triangular, row `q` of Λ and of Λ_{,μ} depends only on the leading
//! `(q+1) x (q+1)` block of Θ, so the retained block is exact: enlarging
//! `q_max` appends rows without changing existing ones.

use crate::error::{Error, Result};
use crate::fit::linear_fit;
use crate::linalg::{LowerTriangular, Precision, Real, SymMatrix};
use crate::moments::{moment_sequence, HankelSet, ObjectModel};

#[derive(Clone, Debug)]
pub struct CholeskyPair {
    pub q_max: usize,
    /// `Θ = Λ Λ^T`
    pub lambda: LowerTriangular,
    /// `Ξ = V V^T`
    pub v: LowerTriangular,
    pub delta: Real,
    /// `θ_0 ..= θ_(2 q_max)`
    pub theta: Vec<Real>,
}

impl CholeskyPair {
    pub fn precision(&self) -> Precision {
        self.delta.precision()
    }

    pub fn dim(&self) -> usize {
        self.q_max + 1
    }

    /// Largest `|Λ_qr - Δ^q V_qr| / |Λ_qr|`.
    pub fn scaling_mismatch(&self) -> Real {
        let prec = self.precision();
        let mut worst = Real::zero(prec);
        for q in 0..self.dim() {
            let dq = self.delta.powi(q as i32);
            for r in 0..=q {
                let l = &self.lambda[(q, r)];
                if l.is_zero() {
                    continue;
                }
                let diff = (l - &dq * &self.v[(q, r)]).abs() / l.abs();
                worst = worst.max(diff);
            }
        }
        worst
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivativeMethod {
    Recursive,
    Sarkka,
    FiniteDifference,
}

#[derive(Clone, Debug)]
pub struct CholeskyDerivative {
    pub mu: usize,
    /// `Λ_{,μ}`
    pub matrix: LowerTriangular,
    pub method: DerivativeMethod,
    /// `Q = V^-1 Θ_{,μ} V^-T` for the Särkkä form.
    pub q_matrix: Option<SymMatrix>,
}

impl CholeskyDerivative {
    /// Rows `q < ⌈μ/2⌉` that must vanish.
    pub fn zero_rows(&self) -> usize {
        self.mu.div_ceil(2).min(self.matrix.dim())
    }

    pub fn zero_block_exact(&self) -> bool {
        (0..self.zero_rows()).all(|q| self.matrix.row(q).iter().all(|x| x.is_zero()))
    }
}

/// Row-by-row Cholesky recursion on the Hankel matrix `θ_(q+r)`.
fn hankel_recursion(moments: &[Real], n: usize) -> Result<LowerTriangular> {
    let prec = moments[0].precision();
    let floor = prec.tolerance(8);
    let mut l = LowerTriangular::zeros(n, prec);
    for q in 0..n {
        for r in 0..q {
            let mut acc = moments[q + r].clone();
            for s in 0..r {
                acc -= &l[(q, s)] * &l[(r, s)];
            }
            let v = acc / &l[(r, r)];
            l.set(q, r, v);
        }
        let mut acc = moments[2 * q].clone();
        for s in 0..q {
            acc -= l[(q, s)].square();
        }
        if !acc.is_positive() || acc <= &floor * moments[2 * q].abs() {
            return Err(Error::NotPositiveDefinite(q));
        }
        l.set(q, q, acc.sqrt());
    }
    Ok(l)
}

pub fn cholesky_factor(h: &HankelSet) -> Result<CholeskyPair> {
    let n = h.q_max + 1;
    let theta: Vec<Real> = (0..=2 * h.q_max)
        .map(|k| h.theta[(k.min(h.q_max), k - k.min(h.q_max))].clone())
        .collect();
    let phi: Vec<Real> = (0..=2 * h.q_max)
        .map(|k| h.xi[(k.min(h.q_max), k - k.min(h.q_max))].clone())
        .collect();
    let lambda = hankel_recursion(&theta, n)?;
    let v = hankel_recursion(&phi, n)?;
    Ok(CholeskyPair {
        q_max: h.q_max,
        lambda,
        v,
        delta: h.delta.clone(),
        theta,
    })
}

/// Factors from an object directly.
pub fn object_cholesky(obj: &ObjectModel, q_max: usize) -> Result<CholeskyPair> {
    if let Some(atoms) = obj.finite_support() {
        if atoms <= q_max {
            return Err(Error::FiniteSupport { atoms });
        }
    }
    cholesky_factor(&crate::moments::object_hankel(obj, q_max)?)
}

fn kronecker(a: usize, b: usize, prec: Precision) -> Real {
    if a == b {
        Real::one(prec)
    } else {
        Real::zero(prec)
    }
}

/// Differentiated recursion, row by row, cases `r < q` then `r = q`.
pub fn derivative_recursive(pair: &CholeskyPair, mu: usize) -> Result<CholeskyDerivative> {
    let n = pair.dim();
    let prec = pair.precision();
    let l = &pair.lambda;
    let mut d = LowerTriangular::zeros(n, prec);
    for q in 0..n {
        for r in 0..q {
            let mut acc = kronecker(mu, q + r, prec);
            for s in 0..r {
                acc -= &d[(q, s)] * &l[(r, s)] + &l[(q, s)] * &d[(r, s)];
            }
            acc -= &l[(q, r)] * &d[(r, r)];
            let v = acc / &l[(r, r)];
            d.set(q, r, v);
        }
        let mut acc = kronecker(mu, 2 * q, prec);
        for s in 0..q {
            acc -= &l[(q, s)] * &d[(q, s)] * 2.0;
        }
        let v = acc / (&l[(q, q)] * 2.0);
        d.set(q, q, v);
    }
    if let Some(bad) = (0..n).find(|&q| !d[(q, q)].is_finite()) {
        return Err(Error::NotPositiveDefinite(bad));
    }
    Ok(CholeskyDerivative {
        mu,
        matrix: d,
        method: DerivativeMethod::Recursive,
        q_matrix: None,
    })
}

/// `Λ_{qr,μ} = Δ^(q-μ) Σ_s V_qs T_sr Q_sr` with `Q = V^-1 Θ_{,μ} V^-T`
/// formed by two sets of forward substitutions.
pub fn derivative_sarkka(pair: &CholeskyPair, mu: usize) -> Result<CholeskyDerivative> {
    let n = pair.dim();
    let prec = pair.precision();
    let v = &pair.v;
    // Columns of Θ_{,μ}: e_(μ-c) when 0 <= μ-c < n.
    let e_col = |c: usize| -> Vec<Real> { (0..n).map(|r| kronecker(mu, r + c, prec)).collect() };
    // Y = V^-1 Θ_{,μ}, column by column.
    let y_cols: Vec<Vec<Real>> = (0..n).map(|c| v.solve(&e_col(c))).collect();
    // Q = V^-1 Y^T; column c of Y^T is row c of Y.
    let q_cols: Vec<Vec<Real>> = (0..n)
        .map(|c| {
            let row: Vec<Real> = (0..n).map(|k| y_cols[k][c].clone()).collect();
            v.solve(&row)
        })
        .collect();
    let q_matrix = SymMatrix::from_fn(n, |i, j| (&q_cols[j][i] + &q_cols[i][j]) / 2.0);
    let mut d = LowerTriangular::zeros(n, prec);
    for q in 0..n {
        let scale = pair.delta.powi(q as i32 - mu as i32);
        for r in 0..=q {
            let mut acc = Real::zero(prec);
            // T_sr vanishes for s < r.
            for s in r..=q {
                let term = &v[(q, s)] * &q_matrix[(s, r)];
                if s == r {
                    acc += term / 2.0;
                } else {
                    acc += term;
                }
            }
            d.set(q, r, acc * &scale);
        }
    }
    Ok(CholeskyDerivative {
        mu,
        matrix: d,
        method: DerivativeMethod::Sarkka,
        q_matrix: Some(q_matrix),
    })
}

/// Finite-difference step `2^(-bits/3) · max(|θ_μ|, Δ^μ)`.
pub fn fd_step(pair: &CholeskyPair, mu: usize) -> Real {
    let prec = pair.precision();
    let scale = pair.delta.powi(mu as i32);
    let scale = match pair.theta.get(mu) {
        Some(t) => t.abs().max(scale),
        None => scale,
    };
    prec.pow2(-((prec.bits() / 3) as i32)) * scale
}

/// Central difference of the factor in θ_μ, all other moments held fixed.
pub fn derivative_finite_difference(pair: &CholeskyPair, mu: usize) -> Result<CholeskyDerivative> {
    let n = pair.dim();
    let prec = pair.precision();
    if mu >= pair.theta.len() {
        return Ok(CholeskyDerivative {
            mu,
            matrix: LowerTriangular::zeros(n, prec),
            method: DerivativeMethod::FiniteDifference,
            q_matrix: None,
        });
    }
    let h = fd_step(pair, mu);
    let mut plus = pair.theta.clone();
    plus[mu] += &h;
    let mut minus = pair.theta.clone();
    minus[mu] -= &h;
    let lp = hankel_recursion(&plus, n)?;
    let lm = hankel_recursion(&minus, n)?;
    let two_h = &h * 2.0;
    let matrix = LowerTriangular::from_fn(n, prec, |q, r| (&lp[(q, r)] - &lm[(q, r)]) / &two_h);
    Ok(CholeskyDerivative {
        mu,
        matrix,
        method: DerivativeMethod::FiniteDifference,
        q_matrix: None,
    })
}

/// Largest entrywise `|a - b|` relative to `max |a|`.
pub fn relative_difference(a: &CholeskyDerivative, b: &CholeskyDerivative) -> Real {
    let prec = a.matrix.precision();
    let scale = a.matrix.max_abs();
    if scale.is_zero() {
        return b.matrix.max_abs();
    }
    let n = a.matrix.dim();
    let mut worst = Real::zero(prec);
    for q in 0..n {
        for r in 0..=q {
            worst = worst.max((&a.matrix[(q, r)] - &b.matrix[(q, r)]).abs());
        }
    }
    worst / scale
}

/// Largest `|a_qr - b_qr| / max_r |a_qr|`, i.e. each row measured on its own
/// scale (rows of Λ_{,μ} scale as `Δ^(q-μ)`).
pub fn row_relative_difference(a: &CholeskyDerivative, b: &CholeskyDerivative) -> Real {
    let prec = a.matrix.precision();
    let n = a.matrix.dim();
    let mut worst = Real::zero(prec);
    for q in 0..n {
        let scale = a.matrix.row(q).iter().fold(Real::zero(prec), |m, x| m.max(x.abs()));
        for r in 0..=q {
            let diff = (&a.matrix[(q, r)] - &b.matrix[(q, r)]).abs();
            if scale.is_zero() {
                worst = worst.max(diff);
            } else {
                worst = worst.max(diff / &scale);
            }
        }
    }
    worst
}

#[derive(Clone, Debug)]
pub struct EntrySlope {
    pub q: usize,
    pub r: usize,
    pub slope: f64,
    /// Exponent `p` in the `O(Δ^p)` statement for this entry.
    pub predicted: f64,
    pub leading: bool,
    pub ok: bool,
}

#[derive(Clone, Debug)]
pub struct OrderReport {
    pub mu: usize,
    pub deltas: Vec<f64>,
    /// Slopes of `|Λ_qr|` against Δ.
    pub factor: Vec<EntrySlope>,
    /// Slopes of `|Λ_{qr,μ}|` against Δ (entries that vanish identically are omitted).
    pub derivative: Vec<EntrySlope>,
    /// Exponent of the leading order: `-μ/2` (even) or `-(μ-1)/2` (odd).
    pub leading_exponent: f64,
    pub zero_block_exact: bool,
    pub all_ok: bool,
}

/// Leading entries of Λ_{,μ}: `(μ/2, μ/2)` for even μ; `(q, q-1)` and `(q, q)`
/// with `q = (μ+1)/2` for odd μ.
pub fn leading_entries(mu: usize) -> Vec<(usize, usize)> {
    if mu % 2 == 0 {
        vec![(mu / 2, mu / 2)]
    } else {
        let q = mu.div_ceil(2);
        vec![(q, q - 1), (q, q)]
    }
}

pub const SLOPE_TOLERANCE: f64 = 0.1;

/// Fits log-log slopes of every factor and derivative entry over a Δ sweep.
pub fn structure_orders(obj: &ObjectModel, mu: usize, q_max: usize, deltas: &[f64]) -> Result<OrderReport> {
    if deltas.len() < 3 {
        return Err(Error::InvalidInput("a delta sweep needs at least 3 values".into()));
    }
    let prec = obj.precision();
    let mut factors = Vec::new();
    let mut derivs = Vec::new();
    let mut zero_block_exact = true;
    for &d in deltas {
        let model = obj.with_delta(Real::from_f64(d, prec))?;
        let pair = object_cholesky(&model, q_max)?;
        let deriv = derivative_recursive(&pair, mu)?;
        zero_block_exact &= deriv.zero_block_exact();
        factors.push(pair.lambda);
        derivs.push(deriv.matrix);
    }
    let ln_d: Vec<f64> = deltas.iter().map(|d| d.ln()).collect();
    let leading_exponent = -((mu / 2) as f64);
    let leads = leading_entries(mu);
    let lead_row = leads[0].0;
    let n = q_max + 1;
    let slope_of = |mats: &[LowerTriangular], q: usize, r: usize| -> Option<f64> {
        if mats.iter().any(|m| m[(q, r)].is_zero()) {
            return None;
        }
        let ys: Vec<f64> = mats.iter().map(|m| m[(q, r)].abs().ln().to_f64()).collect();
        Some(linear_fit(&ln_d, &ys).slope)
    };
    let mut factor = Vec::new();
    let mut derivative = Vec::new();
    for q in 0..n {
        for r in 0..=q {
            if let Some(slope) = slope_of(&factors, q, r) {
                let predicted = q as f64;
                factor.push(EntrySlope {
                    q,
                    r,
                    slope,
                    predicted,
                    leading: false,
                    ok: slope >= predicted - SLOPE_TOLERANCE,
                });
            }
            if let Some(slope) = slope_of(&derivs, q, r) {
                let leading = leads.contains(&(q, r));
                let predicted = q as f64 - mu as f64;
                let ok = if leading {
                    (slope - leading_exponent).abs() <= SLOPE_TOLERANCE
                } else if q > lead_row {
                    // Strictly smaller than the leading order.
                    slope >= predicted - SLOPE_TOLERANCE && slope > leading_exponent + 0.5
                } else {
                    slope >= predicted - SLOPE_TOLERANCE
                };
                derivative.push(EntrySlope {
                    q,
                    r,
                    slope,
                    predicted,
                    leading,
                    ok,
                });
            }
        }
    }
    // For centered objects the odd-μ diagonal lead vanishes identically.
    let leads_present = leads
        .iter()
        .any(|(q, r)| derivative.iter().any(|e| e.q == *q && e.r == *r));
    let all_ok = zero_block_exact
        && leads_present
        && factor.iter().all(|e| e.ok)
        && derivative.iter().all(|e| e.ok);
    Ok(OrderReport {
        mu,
        deltas: deltas.to_vec(),
        factor,
        derivative,
        leading_exponent,
        zero_block_exact,
        all_ok,
    })
}

/// Moments of `obj` with θ_μ taken as a free parameter, for callers that
/// need to rebuild factors at perturbed moments.
pub fn physical_moments(obj: &ObjectModel, q_max: usize) -> Result<Vec<Real>> {
    Ok(moment_sequence(obj, 2 * q_max)?.theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{chol, Matrix};
    use crate::moments::object_hankel;
    use proptest::prelude::*;

    fn prec() -> Precision {
        Precision::default()
    }

    fn real(x: f64) -> Real {
        Real::from_f64(x, prec())
    }

    fn gaussian(delta: f64) -> ObjectModel {
        ObjectModel::gaussian(real(delta)).unwrap()
    }

    fn uniform(delta: f64) -> ObjectModel {
        ObjectModel::uniform(real(delta)).unwrap()
    }

    #[test]
    fn gaussian_unit_factor_is_identity() {
        let pair = object_cholesky(&gaussian(1.0), 1).unwrap();
        assert_eq!(pair.lambda.to_dense(), Matrix::identity(2, prec()));
    }

    #[test]
    fn uniform_corner_entry() {
        let pair = object_cholesky(&uniform(1.0), 2).unwrap();
        let expected = Real::from_int(2, prec()) / (Real::from_int(5, prec()).sqrt() * 3.0);
        assert!((&pair.lambda[(2, 2)] - expected).abs() < prec().tolerance(12));
    }

    #[test]
    fn gaussian_small_delta_entries() {
        let pair = object_cholesky(&gaussian(0.1), 2).unwrap();
        let tol = prec().tolerance(12);
        assert!((&pair.lambda[(1, 1)] - real(0.1)).abs() < tol);
        let expected = real(0.1).square() * Real::from_int(2, prec()).sqrt();
        assert!((&pair.lambda[(2, 2)] - expected).abs() < tol);
    }

    #[test]
    fn recursion_agrees_with_generic_cholesky() {
        for obj in [gaussian(0.3), uniform(0.7), uniform(1.0).with_center(real(0.2))] {
            let h = object_hankel(&obj, 10).unwrap();
            let pair = cholesky_factor(&h).unwrap();
            let generic = chol(&h.theta).unwrap();
            for q in 0..=10 {
                for r in 0..=q {
                    let diff = (&pair.lambda[(q, r)] - &generic[(q, r)]).abs();
                    assert!(diff <= prec().tolerance(8) * pair.lambda[(q, q)].abs().max(Real::one(prec())));
                }
            }
        }
    }

    #[test]
    fn lambda_is_delta_scaled_v() {
        let pair = object_cholesky(&uniform(0.05), 12).unwrap();
        assert!(pair.scaling_mismatch() < prec().tolerance(24));
    }

    #[test]
    fn constellation_with_few_atoms_is_rejected() {
        let obj = ObjectModel::points(vec![real(-1.0), real(1.0)], vec![real(0.5), real(0.5)], real(0.1)).unwrap();
        assert!(matches!(object_cholesky(&obj, 3), Err(Error::FiniteSupport { atoms: 2 })));
    }

    #[test]
    fn second_moment_diagonal_derivative() {
        let pair = object_cholesky(&gaussian(0.2), 4).unwrap();
        let d = derivative_recursive(&pair, 2).unwrap();
        let expected = (&pair.lambda[(1, 1)] * 2.0).recip();
        assert!((&d.matrix[(1, 1)] - expected).abs() < prec().tolerance(16));
    }

    #[test]
    fn first_moment_subdiagonal_derivative() {
        let pair = object_cholesky(&gaussian(0.2), 4).unwrap();
        let d = derivative_recursive(&pair, 1).unwrap();
        assert!((&d.matrix[(1, 0)] - 1.0).abs() < prec().tolerance(16));
        let expected = -(&pair.lambda[(1, 0)]) / (&pair.lambda[(1, 1)] * &pair.lambda[(0, 0)]);
        assert!((&d.matrix[(1, 1)] - expected).abs() < prec().tolerance(16));
    }

    #[test]
    fn corner_derivative_vanishes() {
        let pair = object_cholesky(&uniform(0.3), 5).unwrap();
        for mu in 1..=10 {
            assert!(derivative_recursive(&pair, mu).unwrap().matrix[(0, 0)].is_zero());
            assert!(derivative_sarkka(&pair, mu).unwrap().matrix[(0, 0)].is_zero());
        }
    }

    #[test]
    fn zero_block_is_exact_for_both_forms() {
        let pair = object_cholesky(&uniform(0.1).with_center(real(0.3)), 6).unwrap();
        for mu in 1..=12 {
            assert!(derivative_recursive(&pair, mu).unwrap().zero_block_exact(), "mu = {mu}");
            assert!(derivative_sarkka(&pair, mu).unwrap().zero_block_exact(), "mu = {mu}");
        }
    }

    #[test]
    fn orders_beyond_truncation_give_zero() {
        let pair = object_cholesky(&gaussian(0.1), 3).unwrap();
        let s = derivative_sarkka(&pair, 7).unwrap();
        let r = derivative_recursive(&pair, 7).unwrap();
        assert!(s.matrix.max_abs().is_zero());
        assert!(r.matrix.max_abs().is_zero());
    }

    #[test]
    fn truncation_preserves_leading_block() {
        let small = object_cholesky(&uniform(0.2), 5).unwrap();
        let large = object_cholesky(&uniform(0.2), 9).unwrap();
        let ds = derivative_recursive(&small, 4).unwrap();
        let dl = derivative_recursive(&large, 4).unwrap();
        for q in 0..=5 {
            for r in 0..=q {
                assert_eq!(ds.matrix[(q, r)], dl.matrix[(q, r)]);
            }
        }
    }

    #[test]
    fn two_forms_agree() {
        let tol = prec().tolerance(16);
        for obj in [gaussian(0.05), uniform(0.2), gaussian(0.5).with_center(real(0.1))] {
            let pair = object_cholesky(&obj, 8).unwrap();
            for mu in 1..=8 {
                let a = derivative_recursive(&pair, mu).unwrap();
                let b = derivative_sarkka(&pair, mu).unwrap();
                assert!(row_relative_difference(&a, &b) < tol, "{} mu = {mu}", obj.kind_name());
            }
        }
    }

    #[test]
    fn finite_difference_agrees() {
        for obj in [gaussian(0.05), uniform(0.2)] {
            let pair = object_cholesky(&obj, 6).unwrap();
            for mu in 1..=8 {
                let a = derivative_recursive(&pair, mu).unwrap();
                let fd = derivative_finite_difference(&pair, mu).unwrap();
                assert!(row_relative_difference(&a, &fd) < 1e-15, "mu = {mu}");
            }
        }
    }

    #[test]
    fn even_order_leading_slope() {
        let rep = structure_orders(&gaussian(1.0), 4, 4, &[0.04, 0.02, 0.01]).unwrap();
        let lead = rep.derivative.iter().find(|e| e.q == 2 && e.r == 2).unwrap();
        assert!((lead.slope + 2.0).abs() < 0.1);
        assert!(rep.all_ok);
    }

    #[test]
    fn odd_order_leading_slope() {
        let rep = structure_orders(&uniform(1.0), 3, 4, &[0.04, 0.02, 0.01]).unwrap();
        let lead = rep.derivative.iter().find(|e| e.q == 2 && e.r == 1).unwrap();
        assert!((lead.slope + 1.0).abs() < 0.1);
        assert!(rep.all_ok);
    }

    #[test]
    fn factor_slopes_match_row_index() {
        let rep = structure_orders(&uniform(1.0), 2, 5, &[0.04, 0.02, 0.01]).unwrap();
        for e in &rep.factor {
            assert!((e.slope - e.q as f64).abs() < 0.1, "({}, {})", e.q, e.r);
        }
    }

    #[test]
    fn structure_needs_three_deltas() {
        assert!(structure_orders(&uniform(1.0), 2, 4, &[0.1, 0.05]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn forms_agree_on_random_inputs(
            gauss in any::<bool>(),
            delta in 0.01f64..0.8,
            center in -0.3f64..0.3,
            mu in 1usize..=8,
            q_max in 4usize..=6,
        ) {
            let base = if gauss { gaussian(delta) } else { uniform(delta) };
            let pair = object_cholesky(&base.with_center(real(center)), q_max).unwrap();
            let a = derivative_recursive(&pair, mu).unwrap();
            let b = derivative_sarkka(&pair, mu).unwrap();
            prop_assert!(row_relative_difference(&a, &b) < prec().tolerance(16));
            prop_assert!(a.zero_block_exact() && b.zero_block_exact());
        }
    }
}
