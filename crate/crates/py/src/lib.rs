//! Python bindings: objects, OTFs, the K̃ pipeline, baselines and the
//! thermal-state kernels.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qbound::bounds::{
    direct_imaging_fisher, tail_diagnostics, BoundPipeline, BoundResult, ConstellationBounds, DEFAULT_Q_MAX,
    DEFAULT_RTOL,
};
use qbound::cholesky_deriv::{
    derivative_finite_difference, derivative_recursive, derivative_sarkka, object_cholesky, row_relative_difference,
};
use qbound::linalg::SymMatrix;
use qbound::moments::{moment_sequence, ObjectModel};
use qbound::otf::OtfModel;
use qbound::table::Samples;
use qbound::thermal::{self, ModelGenerator, ThermalModel};
use qbound::{Precision, Real};

create_exception!(qbound, QboundError, PyException);

fn py_err(e: qbound::Error) -> PyErr {
    QboundError::new_err(e.to_string())
}

fn prec(bits: u32) -> PyResult<Precision> {
    Precision::new(bits).map_err(py_err)
}

fn real(x: f64, p: Precision) -> Real {
    Real::from_f64(x, p)
}

fn reals(xs: &[f64], p: Precision) -> Vec<Real> {
    xs.iter().map(|&x| real(x, p)).collect()
}

#[pyclass(name = "Object", frozen)]
struct PyObjectModel {
    inner: ObjectModel,
}

#[pymethods]
impl PyObjectModel {
    #[staticmethod]
    #[pyo3(signature = (delta, center = 0.0, bits = 256))]
    fn gaussian(delta: f64, center: f64, bits: u32) -> PyResult<Self> {
        let p = prec(bits)?;
        let inner = ObjectModel::gaussian(real(delta, p)).map_err(py_err)?.with_center(real(center, p));
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (delta, center = 0.0, bits = 256))]
    fn uniform(delta: f64, center: f64, bits: u32) -> PyResult<Self> {
        let p = prec(bits)?;
        let inner = ObjectModel::uniform(real(delta, p)).map_err(py_err)?.with_center(real(center, p));
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (positions, weights, delta, bits = 256))]
    fn points(positions: Vec<f64>, weights: Vec<f64>, delta: f64, bits: u32) -> PyResult<Self> {
        let p = prec(bits)?;
        let inner = ObjectModel::points(reals(&positions, p), reals(&weights, p), real(delta, p)).map_err(py_err)?;
        Ok(Self { inner })
    }

    /// Density sampled at `x` (ascending), normalized to unit mass.
    #[staticmethod]
    #[pyo3(signature = (x, f, delta, resolution = 4096, bits = 256))]
    fn table(x: Vec<f64>, f: Vec<f64>, delta: f64, resolution: usize, bits: u32) -> PyResult<Self> {
        let p = prec(bits)?;
        let samples = Samples::new(reals(&x, p), reals(&f, p)).map_err(py_err)?;
        let inner = ObjectModel::table(&samples, resolution, real(delta, p)).map_err(py_err)?;
        Ok(Self { inner })
    }

    fn with_delta(&self, delta: f64) -> PyResult<Self> {
        let p = self.inner.precision();
        Ok(Self {
            inner: self.inner.with_delta(real(delta, p)).map_err(py_err)?,
        })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind_name()
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta().to_f64()
    }

    /// Physical moments θ_0..θ_mu_max.
    fn moments(&self, mu_max: usize) -> PyResult<Vec<f64>> {
        let m = moment_sequence(&self.inner, mu_max).map_err(py_err)?;
        Ok(m.theta.iter().map(Real::to_f64).collect())
    }

    fn __repr__(&self) -> String {
        format!("Object(kind={}, delta={})", self.inner.kind_name(), self.inner.delta().to_f64())
    }
}

#[pyclass(name = "Otf", frozen)]
struct PyOtf {
    inner: OtfModel,
}

#[pymethods]
impl PyOtf {
    #[staticmethod]
    #[pyo3(signature = (beta = 1.0, bits = 256))]
    fn gaussian(beta: f64, bits: u32) -> PyResult<Self> {
        let p = prec(bits)?;
        Ok(Self {
            inner: OtfModel::gaussian(real(beta, p)).map_err(py_err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (beta = 1.0, bits = 256))]
    fn flat(beta: f64, bits: u32) -> PyResult<Self> {
        let p = prec(bits)?;
        Ok(Self {
            inner: OtfModel::flat(real(beta, p)).map_err(py_err)?,
        })
    }

    /// `|Ψ(k)|²` sampled at `k`.
    #[staticmethod]
    #[pyo3(signature = (k, psi2, bits = 256))]
    fn custom(k: Vec<f64>, psi2: Vec<f64>, bits: u32) -> PyResult<Self> {
        let p = prec(bits)?;
        let samples = Samples::new(reals(&k, p), reals(&psi2, p)).map_err(py_err)?;
        Ok(Self {
            inner: OtfModel::custom(&samples).map_err(py_err)?,
        })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind_name()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta().to_f64()
    }

    fn __repr__(&self) -> String {
        format!("Otf(kind={}, beta={})", self.inner.kind_name(), self.inner.beta().to_f64())
    }
}

fn bound_dict<'py>(py: Python<'py>, r: &BoundResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("mu", r.mu)?;
    d.set_item("nu", r.nu)?;
    d.set_item("q_max", r.q_max)?;
    d.set_item("value", r.value.to_f64())?;
    d.set_item("value_decimal", r.value.to_decimal())?;
    d.set_item("norm_residual", r.norm_residual.to_f64())?;
    d.set_item("b_residual", r.b_residual.to_f64())?;
    d.set_item("tail_estimate", r.tail_estimate.to_f64())?;
    d.set_item("verdict", r.verdict.as_str())?;
    d.set_item("increments", r.increments.iter().map(Real::to_f64).collect::<Vec<_>>())?;
    Ok(d)
}

#[pyclass(name = "Pipeline", frozen)]
struct PyPipeline {
    inner: BoundPipeline,
}

#[pymethods]
impl PyPipeline {
    #[new]
    #[pyo3(signature = (object, otf, q_max = DEFAULT_Q_MAX, w = None, rtol = DEFAULT_RTOL))]
    fn new(object: &PyObjectModel, otf: &PyOtf, q_max: usize, w: Option<f64>, rtol: f64) -> PyResult<Self> {
        let p = object.inner.precision();
        let inner =
            BoundPipeline::new(&object.inner, &otf.inner, q_max, w.map(|w| real(w, p)), rtol).map_err(py_err)?;
        Ok(Self { inner })
    }

    /// Truncated `K̃_μν` with residuals and the convergence verdict.
    #[pyo3(signature = (mu, nu = None))]
    fn k_tilde<'py>(&self, py: Python<'py>, mu: usize, nu: Option<usize>) -> PyResult<Bound<'py, PyDict>> {
        let r = self.inner.k_tilde(mu, nu.unwrap_or(mu)).map_err(py_err)?;
        bound_dict(py, &r)
    }

    fn k_tilde_matrix(&self, mus: Vec<usize>) -> PyResult<Vec<Vec<f64>>> {
        Ok(self.inner.k_tilde_matrix(&mus).map_err(py_err)?.to_f64())
    }

    fn leading_order(&self, mu: usize) -> PyResult<f64> {
        Ok(self.inner.leading_order(mu).map_err(py_err)?.to_f64())
    }

    /// Λ_{,μ} as nested lists.
    fn derivative(&self, mu: usize) -> PyResult<Vec<Vec<f64>>> {
        Ok(self.inner.derivative(mu).map_err(py_err)?.matrix.to_f64())
    }

    fn cholesky(&self) -> Vec<Vec<f64>> {
        self.inner.pair.lambda.to_f64()
    }

    /// Tail diagnostics for `K̃_μμ`.
    fn tail<'py>(&self, py: Python<'py>, mu: usize) -> PyResult<Bound<'py, PyDict>> {
        let p = &self.inner;
        let d = p.derivative(mu).map_err(py_err)?;
        let rep = tail_diagnostics(&p.pi, &p.pair, &d, &p.object, &p.otf).map_err(py_err)?;
        let out = PyDict::new(py);
        out.set_item("orders", rep.orders)?;
        out.set_item("zeta_ratios", rep.zeta_ratios)?;
        out.set_item("hs_ratios", rep.hs_ratios)?;
        out.set_item("hs_norm_sq", rep.hs_norm_sq.to_f64())?;
        out.set_item("hs_bound", rep.hs_bound.to_f64())?;
        out.set_item("k_upper", rep.k_upper.to_f64())?;
        out.set_item("limiting_ratio", rep.limiting_ratio)?;
        Ok(out)
    }

    #[getter]
    fn w(&self) -> f64 {
        self.inner.pi.w.to_f64()
    }

    #[getter]
    fn scaled_trace(&self) -> f64 {
        self.inner.pi.scaled_trace.to_f64()
    }
}

/// Row-relative gaps between the recursive, Särkkä and finite-difference derivatives.
#[pyfunction]
fn derivative_check<'py>(py: Python<'py>, object: &PyObjectModel, q_max: usize, mu: usize) -> PyResult<Bound<'py, PyDict>> {
    let pair = object_cholesky(&object.inner, q_max).map_err(py_err)?;
    let r = derivative_recursive(&pair, mu).map_err(py_err)?;
    let s = derivative_sarkka(&pair, mu).map_err(py_err)?;
    let fd = derivative_finite_difference(&pair, mu).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("forms", row_relative_difference(&r, &s).to_f64())?;
    d.set_item("finite_difference", row_relative_difference(&r, &fd).to_f64())?;
    d.set_item("zero_block_exact", r.zero_block_exact())?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (object, otf, mu, photons = 1.0, truncation = 2 * DEFAULT_Q_MAX))]
fn direct_fisher(object: &PyObjectModel, otf: &PyOtf, mu: usize, photons: f64, truncation: usize) -> PyResult<f64> {
    let p = object.inner.precision();
    let j = direct_imaging_fisher(&object.inner, &otf.inner, mu, &real(photons, p), truncation).map_err(py_err)?;
    Ok(j.value.to_f64())
}

/// Convexity and classical-simulation bounds for a point object.
#[pyfunction]
#[pyo3(signature = (object, otf, mu, photons = 1.0))]
fn constellation_bounds(object: &PyObjectModel, otf: &PyOtf, mu: usize, photons: f64) -> PyResult<(f64, f64)> {
    let p = object.inner.precision();
    let cb = ConstellationBounds::new(&object.inner, &otf.inner, mu).map_err(py_err)?;
    let n = real(photons, p);
    Ok((cb.convexity_bound(mu, &n).to_f64(), cb.classical_sim_bound(mu, &n).to_f64()))
}

fn sym(rows: &[Vec<f64>], p: Precision) -> PyResult<SymMatrix> {
    let n = rows.len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(QboundError::new_err("matrix must be square"));
        }
        for j in 0..i {
            if (r[j] - rows[j][i]).abs() > 1e-12 * (1.0 + r[j].abs()) {
                return Err(QboundError::new_err("matrix must be symmetric"));
            }
        }
    }
    let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    Ok(SymMatrix::from_f64_rows(&refs, p))
}

fn thermal_model(gamma: Vec<Vec<f64>>, derivs: Vec<Vec<Vec<f64>>>, bits: u32) -> PyResult<ThermalModel> {
    let p = prec(bits)?;
    let g = sym(&gamma, p)?;
    let d = derivs.iter().map(|m| sym(m, p)).collect::<PyResult<Vec<_>>>()?;
    ThermalModel::new(g, d, 1.0).map_err(py_err)
}

/// Exact thermal-state QFI `K(ρ)`.
#[pyfunction]
#[pyo3(signature = (gamma, derivs, bits = 256))]
fn thermal_qfi(gamma: Vec<Vec<f64>>, derivs: Vec<Vec<Vec<f64>>>, bits: u32) -> PyResult<Vec<Vec<f64>>> {
    let m = thermal_model(gamma, derivs, bits)?;
    Ok(thermal::thermal_qfi(&m).map_err(py_err)?.to_f64())
}

/// SLD relaxation `K(Γ)`.
#[pyfunction]
#[pyo3(signature = (gamma, derivs, bits = 256))]
fn sld_qfi(gamma: Vec<Vec<f64>>, derivs: Vec<Vec<Vec<f64>>>, bits: u32) -> PyResult<Vec<Vec<f64>>> {
    let m = thermal_model(gamma, derivs, bits)?;
    Ok(thermal::sld_qfi(&m).map_err(py_err)?.k.to_f64())
}

/// `J(Φ)` per mode.
#[pyfunction]
#[pyo3(signature = (gamma, derivs, bits = 256))]
fn infrared_fisher(gamma: Vec<Vec<f64>>, derivs: Vec<Vec<Vec<f64>>>, bits: u32) -> PyResult<Vec<Vec<f64>>> {
    let m = thermal_model(gamma, derivs, bits)?;
    Ok(thermal::infrared_fisher(&m).map_err(py_err)?.to_f64())
}

/// `κ(ε)` at each ε in `epsilons` (ascending).
#[pyfunction]
#[pyo3(signature = (gamma, derivs, epsilons, bits = 256))]
fn kappa_curve(
    gamma: Vec<Vec<f64>>,
    derivs: Vec<Vec<Vec<f64>>>,
    epsilons: Vec<f64>,
    bits: u32,
) -> PyResult<Vec<Vec<Vec<f64>>>> {
    let m = thermal_model(gamma, derivs, bits)?;
    let grid = reals(&epsilons, m.precision());
    let curve = thermal::kappa_curve(&m, &grid).map_err(py_err)?;
    Ok(curve.iter().map(|s| s.kappa.to_f64()).collect())
}

/// Property suite over seeded random models; `{name: (passed, worst)}`.
#[pyfunction]
#[pyo3(signature = (seed = 1, models = 50, max_dim = 4, bits = 256))]
fn thermal_suite<'py>(py: Python<'py>, seed: u64, models: usize, max_dim: usize, bits: u32) -> PyResult<Bound<'py, PyDict>> {
    let mut generator = ModelGenerator::new(seed, max_dim, prec(bits)?);
    let rep = thermal::property_suite(&mut generator, seed, models).map_err(py_err)?;
    let d = PyDict::new(py);
    for p in &rep.properties {
        d.set_item(p.name, (p.passed, p.worst))?;
    }
    Ok(d)
}

#[pymodule]
#[pyo3(name = "qbound")]
fn qbound_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("QboundError", m.py().get_type::<QboundError>())?;
    m.add_class::<PyObjectModel>()?;
    m.add_class::<PyOtf>()?;
    m.add_class::<PyPipeline>()?;
    m.add_function(wrap_pyfunction!(derivative_check, m)?)?;
    m.add_function(wrap_pyfunction!(direct_fisher, m)?)?;
    m.add_function(wrap_pyfunction!(constellation_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(thermal_qfi, m)?)?;
    m.add_function(wrap_pyfunction!(sld_qfi, m)?)?;
    m.add_function(wrap_pyfunction!(infrared_fisher, m)?)?;
    m.add_function(wrap_pyfunction!(kappa_curve, m)?)?;
    m.add_function(wrap_pyfunction!(thermal_suite, m)?)?;
    Ok(())
}
