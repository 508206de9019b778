//! Gauss-Legendre and Gauss-Hermite quadrature at working precision.
//!
//! Nodes are located in `f64` and polished by Newton's method in [`Real`]
//! arithmetic. Rules are cached per `(family, order, bits)`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::real::{Precision, Real};
use crate::error::{Error, Result};

pub const DEFAULT_ORDER: usize = 200;
pub const MAX_LEGENDRE_ORDER: usize = 800;
/// Beyond this the Hermite recurrence overflows the `f64` seeding pass.
pub const MAX_HERMITE_ORDER: usize = 400;

#[derive(Debug)]
pub struct QuadRule {
    pub nodes: Vec<Real>,
    pub weights: Vec<Real>,
}

#[derive(Clone, Debug)]
pub enum QuadDomain {
    /// Plain integral over `[lower, upper]`.
    Interval { lower: Real, upper: Real },
    /// Expectation under a centered normal density with this standard deviation.
    Gaussian { std_dev: Real },
}

#[derive(Clone, Debug)]
pub struct QuadResult {
    pub value: Real,
    /// Change observed on the last order doubling.
    pub error: Real,
    pub order: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Family {
    Legendre,
    Hermite,
}

type RuleCache = Mutex<HashMap<(Family, usize, u32), Arc<QuadRule>>>;

fn cache() -> &'static RuleCache {
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cached(family: Family, n: usize, prec: Precision, build: impl FnOnce() -> QuadRule) -> Arc<QuadRule> {
    let key = (family, n, prec.bits());
    if let Some(rule) = cache().lock().expect("quadrature cache poisoned").get(&key) {
        return rule.clone();
    }
    let rule = Arc::new(build());
    cache()
        .lock()
        .expect("quadrature cache poisoned")
        .entry(key)
        .or_insert(rule)
        .clone()
}

fn newton_steps(prec: Precision) -> usize {
    // f64 seeds carry ~50 bits; each step doubles them.
    let mut bits = 48u32;
    let mut steps = 1;
    while bits < prec.bits() + 16 {
        bits *= 2;
        steps += 1;
    }
    steps
}

fn legendre_f64(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for j in 2..=n {
        let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn legendre_real(n: usize, x: &Real) -> (Real, Real) {
    let prec = x.precision();
    let (mut p0, mut p1) = (Real::one(prec), x.clone());
    for j in 2..=n {
        let p2 = (x * &p1 * ((2 * j - 1) as f64) - &p0 * ((j - 1) as f64)) / (j as f64);
        p0 = p1;
        p1 = p2;
    }
    let dp = (x * &p1 - &p0) * (n as f64) / (x.square() - 1.0);
    (p1, dp)
}

/// `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize, prec: Precision) -> Arc<QuadRule> {
    cached(Family::Legendre, n, prec, || {
        let steps = newton_steps(prec);
        let mut nodes = vec![Real::zero(prec); n];
        let mut weights = vec![Real::zero(prec); n];
        for i in 0..n.div_ceil(2) {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_f64(n, z);
                let dz = p / dp;
                z -= dz;
                if dz.abs() < 1e-15 {
                    break;
                }
            }
            let mut x = Real::from_f64(z, prec);
            if n % 2 == 1 && i == n / 2 {
                x = Real::zero(prec);
            } else {
                for _ in 0..steps {
                    let (p, dp) = legendre_real(n, &x);
                    x -= p / dp;
                }
            }
            let (_, dp) = legendre_real(n, &x);
            let w = Real::from_int(2, prec) / ((Real::one(prec) - x.square()) * dp.square());
            nodes[i] = x.clone();
            nodes[n - 1 - i] = -x;
            weights[i] = w.clone();
            weights[n - 1 - i] = w;
        }
        // Ascending node order.
        nodes.reverse();
        weights.reverse();
        QuadRule { nodes, weights }
    })
}

fn hermite_f64(n: usize, x: f64) -> (f64, f64) {
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let (mut p1, mut p2) = (pim4, 0.0);
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        p1 = x * (2.0 / j as f64).sqrt() * p2 - ((j - 1) as f64 / j as f64).sqrt() * p3;
    }
    (p1, (2.0 * n as f64).sqrt() * p2)
}

/// `n`-point Gauss-Hermite rule for the weight `exp(-x^2)`.
pub fn gauss_hermite(n: usize, prec: Precision) -> Arc<QuadRule> {
    cached(Family::Hermite, n, prec, || {
        let steps = newton_steps(prec);
        let a: Vec<Real> = (1..=n)
            .map(|j| Real::from_ratio(2, j as i64, prec).sqrt())
            .collect();
        let b: Vec<Real> = (1..=n)
            .map(|j| Real::from_ratio(j as i64 - 1, j as i64, prec).sqrt())
            .collect();
        let pim4 = Real::pi(prec).sqrt().sqrt().recip();
        let dscale = Real::from_int(2 * n as i64, prec).sqrt();
        let eval = |x: &Real| -> (Real, Real) {
            let (mut p1, mut p2) = (pim4.clone(), Real::zero(prec));
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = x * &a[j] * &p2 - &b[j] * &p3;
            }
            (p1, &dscale * &p2)
        };

        // Seeds: eigenvalues of the Jacobi matrix, largest first.
        let off: Vec<f64> = (1..n).map(|j| (j as f64 / 2.0).sqrt()).collect();
        let mut seeds = symmetric_tridiagonal_eigenvalues(vec![0.0; n], off);
        seeds.sort_by(|a, b| b.total_cmp(a));
        let m = n.div_ceil(2);
        let roots: Vec<f64> = seeds[..m]
            .iter()
            .map(|&s| {
                let mut z = s;
                for _ in 0..20 {
                    let (p, dp) = hermite_f64(n, z);
                    let dz = p / dp;
                    z -= dz;
                    if dz.abs() < 1e-15 * z.abs().max(1.0) {
                        break;
                    }
                }
                z
            })
            .collect();

        let mut nodes = vec![Real::zero(prec); n];
        let mut weights = vec![Real::zero(prec); n];
        for (i, &r) in roots.iter().enumerate() {
            let mut x = Real::from_f64(r, prec);
            if n % 2 == 1 && i == m - 1 {
                x = Real::zero(prec);
            } else {
                for _ in 0..steps {
                    let (p, dp) = eval(&x);
                    x -= p / dp;
                }
            }
            let (_, dp) = eval(&x);
            let w = Real::from_int(2, prec) / dp.square();
            // roots[i] is the i-th largest.
            nodes[n - 1 - i] = x.clone();
            nodes[i] = -x;
            weights[n - 1 - i] = w.clone();
            weights[i] = w;
        }
        QuadRule { nodes, weights }
    })
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit QL iteration.
fn symmetric_tridiagonal_eigenvalues(mut d: Vec<f64>, off: Vec<f64>) -> Vec<f64> {
    let n = d.len();
    let mut e = off;
    e.push(0.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 200, "tridiagonal QL failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d
}

fn apply<F: Fn(&Real) -> Real>(f: &F, domain: &QuadDomain, n: usize, prec: Precision) -> Result<Real> {
    let mut acc = Real::zero(prec);
    match domain {
        QuadDomain::Interval { lower, upper } => {
            let rule = gauss_legendre(n, prec);
            let half = (upper - lower) / 2.0;
            let mid = (upper + lower) / 2.0;
            for (t, w) in rule.nodes.iter().zip(&rule.weights) {
                let x = &half * t + &mid;
                let y = f(&x);
                if !y.is_finite() {
                    return Err(Error::NonFiniteSample(x.to_f64()));
                }
                acc += w * y;
            }
            Ok(acc * half)
        }
        QuadDomain::Gaussian { std_dev } => {
            let rule = gauss_hermite(n, prec);
            let scale = std_dev * Real::from_int(2, prec).sqrt();
            for (t, w) in rule.nodes.iter().zip(&rule.weights) {
                let x = &scale * t;
                let y = f(&x);
                if !y.is_finite() {
                    return Err(Error::NonFiniteSample(x.to_f64()));
                }
                acc += w * y;
            }
            Ok(acc / Real::pi(prec).sqrt())
        }
    }
}

/// Integrates `f` over `domain`, doubling the order from `order` until two
/// successive values differ by less than `10^-(bits/8)` or the family's
/// maximum order is reached.
pub fn quad_integrate<F: Fn(&Real) -> Real>(
    f: F,
    domain: &QuadDomain,
    order: usize,
    prec: Precision,
) -> Result<QuadResult> {
    if order < 2 {
        return Err(Error::InvalidInput(format!("quadrature order must be >= 2, got {order}")));
    }
    let cap = match domain {
        QuadDomain::Interval { .. } => MAX_LEGENDRE_ORDER,
        QuadDomain::Gaussian { .. } => MAX_HERMITE_ORDER,
    };
    let target = Real::from_int(10, prec).powi(-((prec.bits() / 8) as i32));
    let mut n = order.min(cap);
    let mut value = apply(&f, domain, n, prec)?;
    loop {
        let next_n = (2 * n).min(cap);
        if next_n == n {
            // Already at the cap: report the order without an improvement estimate.
            return Ok(QuadResult {
                value,
                error: Real::zero(prec),
                order: n,
            });
        }
        let next = apply(&f, domain, next_n, prec)?;
        let change = (&next - &value).abs();
        n = next_n;
        value = next;
        if change < target || n == cap {
            return Ok(QuadResult {
                value,
                error: change,
                order: n,
            });
        }
    }
}
