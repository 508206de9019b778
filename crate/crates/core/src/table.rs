//! Two-column CSV tables (`x,f` densities and `k,psi2` OTF samples).

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{Precision, Real};

/// Sampled function on a strictly increasing abscissa.
#[derive(Clone, Debug)]
pub struct Samples {
    pub x: Vec<Real>,
    pub y: Vec<Real>,
}

impl Samples {
    pub fn new(x: Vec<Real>, y: Vec<Real>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Table(format!(
                "{} abscissae but {} values",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 2 {
            return Err(Error::Table("at least two samples are required".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Table("abscissae must be strictly increasing".into()));
        }
        if let Some(v) = y.iter().find(|v| v.is_negative() || !v.is_finite()) {
            return Err(Error::Table(format!("negative or non-finite value {v:?}")));
        }
        Ok(Samples { x, y })
    }

    /// Linear interpolation; zero outside the sampled range.
    pub fn interpolate(&self, at: &Real) -> Real {
        let prec = at.precision();
        let n = self.x.len();
        if at < &self.x[0] || at > &self.x[n - 1] {
            return Real::zero(prec);
        }
        let idx = self.x.partition_point(|v| v <= at);
        if idx == 0 {
            return self.y[0].clone();
        }
        if idx >= n {
            return self.y[n - 1].clone();
        }
        let (x0, x1) = (&self.x[idx - 1], &self.x[idx]);
        let (y0, y1) = (&self.y[idx - 1], &self.y[idx]);
        y0 + (y1 - y0) * ((at - x0) / (x1 - x0))
    }

    /// Resamples onto `points` equally spaced abscissae over the same range.
    pub fn resample_uniform(&self, points: usize) -> Result<Samples> {
        if points < 2 {
            return Err(Error::Table("grid resolution must be at least 2".into()));
        }
        let lo = &self.x[0];
        let hi = &self.x[self.x.len() - 1];
        let step = (hi - lo) / ((points - 1) as f64);
        let x: Vec<Real> = (0..points).map(|i| lo + &step * (i as f64)).collect();
        let y = x.iter().map(|xi| self.interpolate(xi)).collect();
        Samples::new(x, y)
    }

    /// `int x^k f(x) dx` of the piecewise-linear interpolant, for k = 0..=max_k,
    /// integrated exactly segment by segment.
    pub fn power_integrals(&self, max_k: usize) -> Vec<Real> {
        let prec = self.x[0].precision();
        let mut out = vec![Real::zero(prec); max_k + 1];
        for seg in 0..self.x.len() - 1 {
            let (a, b) = (&self.x[seg], &self.x[seg + 1]);
            let (fa, fb) = (&self.y[seg], &self.y[seg + 1]);
            if fa.is_zero() && fb.is_zero() {
                continue;
            }
            // f(x) = fa + slope (x - a) = (fa - slope a) + slope x.
            let slope = (fb - fa) / (b - a);
            let offset = fa - &slope * a;
            // pa = a^(k+1), pb = b^(k+1)
            let mut pa = a.clone();
            let mut pb = b.clone();
            for (k, acc) in out.iter_mut().enumerate() {
                let d1 = (&pb - &pa) / ((k + 1) as f64);
                pa *= a;
                pb *= b;
                let d2 = (&pb - &pa) / ((k + 2) as f64);
                *acc += &offset * d1 + &slope * d2;
            }
        }
        out
    }
}

/// Reads a two-column CSV whose header must be exactly `expected`.
pub fn read_two_column(path: &Path, expected: [&str; 2], prec: Precision) -> Result<Samples> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Table(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Table(format!("{}: {e}", path.display())))?
        .clone();
    if headers.len() != 2 || headers.get(0) != Some(expected[0]) || headers.get(1) != Some(expected[1]) {
        return Err(Error::Table(format!(
            "{}: header must be `{},{}`",
            path.display(),
            expected[0],
            expected[1]
        )));
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Table(format!("{}: {e}", path.display())))?;
        if record.len() != 2 {
            return Err(Error::Table(format!(
                "{}: row {} has {} fields",
                path.display(),
                line + 2,
                record.len()
            )));
        }
        x.push(Real::parse(&record[0], prec)?);
        y.push(Real::parse(&record[1], prec)?);
    }
    Samples::new(x, y)
}
