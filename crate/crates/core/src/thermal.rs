//! Quantum Fisher information of thermal states described by a real
//! symmetric mutual coherence matrix Γ(θ).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{chol, lyap_solve, sym_eigen, Matrix, Precision, Real, SymEigen, SymMatrix};

#[derive(Clone, Debug)]
pub struct ThermalModel {
    pub gamma: SymMatrix,
    /// `Γ_{,μ}` for each parameter.
    pub derivs: Vec<SymMatrix>,
    /// Number of temporal modes M; `N = M ε`.
    pub modes: f64,
}

fn rotate(e: &Matrix, m: &SymMatrix) -> Result<Matrix> {
    e.transpose().matmul(&m.to_dense())?.matmul(e)
}

impl ThermalModel {
    pub fn new(gamma: SymMatrix, derivs: Vec<SymMatrix>, modes: f64) -> Result<Self> {
        let n = gamma.dim();
        if let Some(d) = derivs.iter().find(|d| d.dim() != n) {
            return Err(Error::DimensionMismatch(format!(
                "Γ is {n}x{n}, a derivative is {0}x{0}",
                d.dim()
            )));
        }
        if derivs.is_empty() {
            return Err(Error::InvalidInput("at least one parameter derivative is required".into()));
        }
        Ok(ThermalModel { gamma, derivs, modes })
    }

    pub fn precision(&self) -> Precision {
        self.gamma.precision()
    }

    pub fn params(&self) -> usize {
        self.derivs.len()
    }

    /// `ε = tr Γ`
    pub fn epsilon(&self) -> Real {
        self.gamma.trace()
    }

    pub fn photons(&self) -> Real {
        self.epsilon() * self.modes
    }

    /// `g = Γ / tr Γ`
    pub fn g(&self) -> SymMatrix {
        self.gamma.scale(&self.epsilon().recip())
    }

    /// `g_{,μ} = Γ_{,μ} / ε`, ε held fixed.
    pub fn g_derivs(&self) -> Vec<SymMatrix> {
        let inv = self.epsilon().recip();
        self.derivs.iter().map(|d| d.scale(&inv)).collect()
    }

    pub fn eigen(&self) -> Result<SymEigen> {
        sym_eigen(&self.gamma)
    }

    /// Same model rescaled so that `tr Γ = epsilon`, derivatives scaled alike.
    pub fn scaled_to(&self, epsilon: &Real) -> ThermalModel {
        let c = epsilon / self.epsilon();
        ThermalModel {
            gamma: self.gamma.scale(&c),
            derivs: self.derivs.iter().map(|d| d.scale(&c)).collect(),
            modes: self.modes,
        }
    }
}

/// `Σ_jl 2 a^μ_jl a^ν_lj / denom(j, l)` in the eigenbasis of `values`.
fn eigen_sum(
    eig: &SymEigen,
    derivs: &[SymMatrix],
    denom: impl Fn(&Real, &Real) -> Real,
) -> Result<SymMatrix> {
    let prec = derivs[0].precision();
    let n = eig.values.len();
    let scale = eig.values.iter().fold(Real::zero(prec), |m, v| m.max(v.abs()));
    let zero_floor = prec.tolerance(16) * scale.max(Real::one(prec));
    let rotated: Vec<Matrix> = derivs.iter().map(|d| rotate(&eig.vectors, d)).collect::<Result<_>>()?;
    let mut out = SymMatrix::zeros(derivs.len(), prec);
    for mu in 0..derivs.len() {
        for nu in 0..=mu {
            let mut acc = Real::zero(prec);
            for j in 0..n {
                for l in 0..n {
                    let num = &rotated[mu][(j, l)] * &rotated[nu][(l, j)] * 2.0;
                    let den = denom(&eig.values[j], &eig.values[l]);
                    if den.abs() <= zero_floor {
                        if num.abs() > zero_floor {
                            return Err(Error::SingularPair(j, l));
                        }
                        continue;
                    }
                    acc += num / den;
                }
            }
            out.set(mu, nu, acc);
        }
    }
    Ok(out)
}

/// Exact thermal-state QFI `K(ρ)`, denominators `γ_j + γ_l + 2 γ_j γ_l`.
pub fn thermal_qfi(model: &ThermalModel) -> Result<SymMatrix> {
    let eig = model.eigen()?;
    eigen_sum(&eig, &model.derivs, |a, b| a + b + a * b * 2.0)
}

/// `Υ_μ` solving `Γ_{,μ} = [(I+Γ) Υ Γ + Γ Υ (I+Γ)] / 2`.
pub fn upsilon(model: &ThermalModel) -> Result<Vec<SymMatrix>> {
    let eig = model.eigen()?;
    let e = &eig.vectors;
    let n = model.gamma.dim();
    model
        .derivs
        .iter()
        .map(|d| {
            let r = rotate(e, d)?;
            let scaled = Matrix::from_fn(n, n, |j, l| {
                let (a, b) = (&eig.values[j], &eig.values[l]);
                &r[(j, l)] * 2.0 / (a + b + a * b * 2.0)
            });
            Ok(e.matmul(&scaled)?.matmul(&e.transpose())?.symmetrize())
        })
        .collect()
}

fn trace_product(a: &SymMatrix, b: &SymMatrix) -> Real {
    let n = a.dim();
    let mut acc = Real::zero(a.precision());
    for i in 0..n {
        for j in 0..n {
            acc += &a[(i, j)] * &b[(j, i)];
        }
    }
    acc
}

#[derive(Clone, Debug)]
pub struct SldQfi {
    /// `K(Γ)_μν = tr Γ_{,μ} L_ν / tr Γ`
    pub k: SymMatrix,
    pub slds: Vec<SymMatrix>,
}

pub fn sld_qfi(model: &ThermalModel) -> Result<SldQfi> {
    sld_qfi_of(&model.gamma, &model.derivs)
}

fn sld_qfi_of(gamma: &SymMatrix, derivs: &[SymMatrix]) -> Result<SldQfi> {
    let slds: Vec<SymMatrix> = derivs.iter().map(|d| lyap_solve(gamma, d)).collect::<Result<_>>()?;
    let tr = gamma.trace();
    let k = SymMatrix::from_fn(derivs.len(), |mu, nu| trace_product(&derivs[mu], &slds[nu]) / &tr);
    Ok(SldQfi { k, slds })
}

/// `K(g)`, the per-photon QFI in the limit `ε -> 0`.
pub fn kappa_zero(model: &ThermalModel) -> Result<SymMatrix> {
    Ok(sld_qfi_of(&model.g(), &model.g_derivs())?.k)
}

#[derive(Clone, Debug)]
pub struct KappaSample {
    pub epsilon: Real,
    pub kappa: SymMatrix,
}

/// `κ(ε)` with denominators `λ_j + λ_l + 2 ε λ_j λ_l`, λ the eigenvalues of `g`.
pub fn kappa_curve(model: &ThermalModel, grid: &[Real]) -> Result<Vec<KappaSample>> {
    if grid.iter().any(|e| !e.is_positive()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("the epsilon grid must be positive and ascending".into()));
    }
    let g = model.g();
    let gd = model.g_derivs();
    let eig = sym_eigen(&g)?;
    grid.iter()
        .map(|eps| {
            let kappa = eigen_sum(&eig, &gd, |a, b| a + b + a * b * eps * 2.0)?;
            Ok(KappaSample {
                epsilon: eps.clone(),
                kappa,
            })
        })
        .collect()
}

/// `J(Φ)_μν = tr Γ_{,μ} Γ^-1 Γ_{,ν} Γ^-1` (per mode).
pub fn infrared_fisher(model: &ThermalModel) -> Result<SymMatrix> {
    let l = chol(&model.gamma)?;
    let n = model.gamma.dim();
    // Γ^-1 A by column solves against L L^T.
    let inv_apply = |a: &SymMatrix| -> Matrix {
        let cols: Vec<Vec<Real>> = (0..n)
            .map(|c| {
                let col: Vec<Real> = (0..n).map(|r| a[(r, c)].clone()).collect();
                let y = l.solve(&col);
                back_substitute(&l, &y)
            })
            .collect();
        Matrix::from_fn(n, n, |r, c| cols[c][r].clone())
    };
    let products: Vec<Matrix> = model.derivs.iter().map(inv_apply).collect();
    Ok(SymMatrix::from_fn(model.params(), |mu, nu| {
        let (a, b) = (&products[mu], &products[nu]);
        let mut acc = Real::zero(model.precision());
        for i in 0..n {
            for j in 0..n {
                acc += &a[(i, j)] * &b[(j, i)];
            }
        }
        acc
    }))
}

/// Solves `L^T x = y`.
fn back_substitute(l: &crate::linalg::LowerTriangular, y: &[Real]) -> Vec<Real> {
    let n = y.len();
    let mut x = vec![Real::zero(l.precision()); n];
    for i in (0..n).rev() {
        let mut acc = y[i].clone();
        for k in i + 1..n {
            acc -= &l[(k, i)] * &x[k];
        }
        x[i] = acc / &l[(i, i)];
    }
    x
}

/// Smallest eigenvalue of `a - b`.
pub fn psd_margin(a: &SymMatrix, b: &SymMatrix) -> Result<Real> {
    Ok(sym_eigen(&a.sub(b))?.values[0].clone())
}

/// Largest `|λ - 1|` over generalized eigenvalues of `a` relative to `b`
/// (worst-case ratio of the quadratic forms) on the range of `b`. On the
/// null space of `b` the largest `|x^T a x|` relative to `||b||` is used.
pub fn relative_gap(a: &SymMatrix, b: &SymMatrix) -> Result<Real> {
    let prec = a.precision();
    let n = a.dim();
    let eig = sym_eigen(b)?;
    let top = eig.values.iter().fold(Real::zero(prec), |m, v| m.max(v.abs()));
    let floor = &top * prec.tolerance(prec.bits() / 2);
    let range: Vec<usize> = (0..n).filter(|&i| eig.values[i] > floor).collect();
    let null: Vec<usize> = (0..n).filter(|&i| eig.values[i] <= floor).collect();
    let rotated = rotate(&eig.vectors, a)?;
    let mut gap = Real::zero(prec);
    if !null.is_empty() {
        let sub = SymMatrix::from_fn(null.len(), |i, j| rotated[(null[i], null[j])].clone());
        let e = sym_eigen(&sub)?;
        let worst = e.values.iter().fold(Real::zero(prec), |m, v| m.max(v.abs()));
        if worst.is_positive() {
            gap = if top.is_positive() { worst / &top } else { Real::from_f64(f64::INFINITY, prec) };
        }
    }
    if !range.is_empty() {
        let s: Vec<Real> = range.iter().map(|&i| eig.values[i].sqrt()).collect();
        let c = SymMatrix::from_fn(range.len(), |i, j| &rotated[(range[i], range[j])] / (&s[i] * &s[j]));
        let e = sym_eigen(&c)?;
        gap = e.values.iter().fold(gap, |m, v| m.max((v - 1.0).abs()));
    }
    Ok(gap)
}

/// Random models: `Γ = A A^T + δ I` with `A = I + (spread/n) U`, U uniform
/// in [-1, 1], and symmetric derivatives with entries uniform in [-1, 1].
#[derive(Clone, Debug)]
pub struct ModelGenerator {
    rng: ChaCha8Rng,
    pub max_dim: usize,
    pub max_params: usize,
    pub spread: f64,
    pub ridge: f64,
    pub prec: Precision,
}

pub const DEFAULT_SPREAD: f64 = 0.1;
pub const DEFAULT_RIDGE: f64 = 1e-3;

impl ModelGenerator {
    pub fn new(seed: u64, max_dim: usize, prec: Precision) -> Self {
        ModelGenerator {
            rng: ChaCha8Rng::seed_from_u64(seed),
            max_dim,
            max_params: 3,
            spread: DEFAULT_SPREAD,
            ridge: DEFAULT_RIDGE,
            prec,
        }
    }

    /// Unconstrained `A` (spread ignored): entries uniform in [-1, 1].
    pub fn unconstrained(mut self) -> Self {
        self.spread = f64::INFINITY;
        self
    }

    fn uniform(&mut self) -> f64 {
        self.rng.random_range(-1.0..=1.0)
    }

    pub fn next_model(&mut self) -> ThermalModel {
        let prec = self.prec;
        let n = self.rng.random_range(1..=self.max_dim);
        let params = self.rng.random_range(1..=self.max_params);
        let a = if self.spread.is_finite() {
            let s = self.spread / n as f64;
            Matrix::from_f64_rows(
                &(0..n)
                    .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 } + s * self.uniform()).collect::<Vec<f64>>())
                    .collect::<Vec<_>>()
                    .iter()
                    .map(|r| r.as_slice())
                    .collect::<Vec<_>>(),
                prec,
            )
        } else {
            Matrix::from_f64_rows(
                &(0..n)
                    .map(|_| (0..n).map(|_| self.uniform()).collect::<Vec<f64>>())
                    .collect::<Vec<_>>()
                    .iter()
                    .map(|r| r.as_slice())
                    .collect::<Vec<_>>(),
                prec,
            )
        };
        let aat = a.matmul(&a.transpose()).expect("square");
        let ridge = Real::from_f64(self.ridge, prec);
        let gamma = SymMatrix::from_fn(n, |i, j| {
            let v = aat[(i, j)].clone();
            if i == j {
                v + &ridge
            } else {
                v
            }
        });
        let derivs = (0..params)
            .map(|_| {
                let vals: Vec<f64> = (0..n * (n + 1) / 2).map(|_| self.uniform()).collect();
                let mut k = 0;
                SymMatrix::from_fn(n, |_, _| {
                    let v = Real::from_f64(vals[k], prec);
                    k += 1;
                    v
                })
            })
            .collect();
        ThermalModel {
            gamma,
            derivs,
            modes: 1.0,
        }
    }
}

pub const PSD_FLOOR: f64 = -1e-12;
pub const LIMIT_GAP: f64 = 0.01;
pub const UV_EPSILON: f64 = 1e-3;
pub const IR_EPSILON: f64 = 1e3;

#[derive(Clone, Debug)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: bool,
    /// Smallest eigenvalue for orderings, largest relative gap for limits.
    pub worst: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub seed: u64,
    pub models: usize,
    pub properties: Vec<PropertyResult>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.properties.iter().all(|p| p.passed)
    }
}

/// `ε = 10^k` for k = -3..=3.
pub fn default_epsilon_grid(prec: Precision) -> Vec<Real> {
    (-3..=3).map(|k| Real::from_int(10, prec).powi(k)).collect()
}

/// Sandwich, monotonicity and limit checks over a seeded ensemble.
pub fn property_suite(generator: &mut ModelGenerator, seed: u64, count: usize) -> Result<SuiteReport> {
    if count == 0 {
        return Err(Error::InvalidInput("ensemble size must be positive".into()));
    }
    let prec = generator.prec;
    let grid = default_epsilon_grid(prec);
    let uv = Real::from_f64(UV_EPSILON, prec);
    let ir = Real::from_f64(IR_EPSILON, prec);
    let mut sandwich = f64::INFINITY;
    let mut classical = f64::INFINITY;
    let mut monotone = f64::INFINITY;
    let mut uv_gap = 0f64;
    let mut ir_gap = 0f64;
    for _ in 0..count {
        let model = generator.next_model();
        let k_rho = thermal_qfi(&model)?;
        let k_gamma = sld_qfi(&model)?.k;
        sandwich = sandwich.min(psd_margin(&k_gamma.scale(&model.epsilon()), &k_rho)?.to_f64());
        let j = infrared_fisher(&model)?;
        classical = classical.min(psd_margin(&j, &k_rho)?.to_f64());
        let curve = kappa_curve(&model, &grid)?;
        for w in curve.windows(2) {
            monotone = monotone.min(psd_margin(&w[0].kappa, &w[1].kappa)?.to_f64());
        }
        // Ultraviolet: M K(ρ) / (N K(Γ)) = K(ρ) / (ε K(Γ)).
        let small = model.scaled_to(&uv);
        let lhs = thermal_qfi(&small)?;
        let rhs = sld_qfi(&small)?.k.scale(&uv);
        uv_gap = uv_gap.max(relative_gap(&lhs, &rhs)?.to_f64());
        // Infrared: K(ρ^⊗M) / (M J(Φ)) = K(ρ) / J(Φ).
        let large = model.scaled_to(&ir);
        let lhs = thermal_qfi(&large)?;
        let rhs = infrared_fisher(&large)?;
        ir_gap = ir_gap.max(relative_gap(&lhs, &rhs)?.to_f64());
    }
    let order = |name, worst: f64| PropertyResult {
        name,
        passed: worst >= PSD_FLOOR,
        worst,
        threshold: PSD_FLOOR,
    };
    let limit = |name, worst: f64| PropertyResult {
        name,
        passed: worst < LIMIT_GAP,
        worst,
        threshold: LIMIT_GAP,
    };
    Ok(SuiteReport {
        seed,
        models: count,
        properties: vec![
            order("sld_sandwich", sandwich),
            order("classical_simulation", classical),
            order("kappa_monotone", monotone),
            limit("ultraviolet_limit", uv_gap),
            limit("infrared_limit", ir_gap),
        ],
    })
}
