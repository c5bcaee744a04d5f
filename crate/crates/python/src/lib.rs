//! Python bindings: penalties, regularizers, transforms, the L-BFGS memory,
//! Helmholtz modeling and configured inversion runs.

use std::path::PathBuf;

use fwi::experiment::{gradient_check_suite, run_experiment, ExperimentConfig, RunOptions};
use fwi::helmholtz::{io, misfit_and_gradient, predict_data as fwi_predict};
use fwi::penalties::{penalty_gradient, penalty_value};
use fwi::regularizers::{prox, reg_value};
use fwi::{
    transforms, AcquisitionGeometry, FrequencyData, GridModel2D, GridPoint, LbfgsMemory, PenaltyKind,
    RegularizerKind, ResidualMatrix, Sponge, TransformKind,
};
use num_complex::Complex64;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: fwi::Error) -> PyErr {
    match e {
        fwi::Error::Io(_) => PyIOError::new_err(e.to_string()),
        fwi::Error::NumericalFailure { .. } | fwi::Error::Divergence(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

#[pyclass(name = "Penalty", module = "fwiprox", frozen)]
pub struct PyPenalty {
    inner: PenaltyKind,
}

#[pymethods]
impl PyPenalty {
    #[staticmethod]
    fn least_squares() -> Self {
        Self { inner: PenaltyKind::LeastSquares }
    }

    #[staticmethod]
    fn huber(kappa: f64) -> PyResult<Self> {
        Ok(Self { inner: PenaltyKind::huber(kappa).map_err(to_py)? })
    }

    #[staticmethod]
    fn student_t(nu: f64) -> PyResult<Self> {
        Ok(Self { inner: PenaltyKind::student_t(nu).map_err(to_py)? })
    }

    /// Penalty of an `n_recv x n_src` residual, receiver fastest.
    fn value(&self, residual: Vec<Complex64>, n_recv: usize, n_src: usize) -> PyResult<f64> {
        let r = ResidualMatrix::new(n_recv, n_src, 0.0, residual).map_err(to_py)?;
        penalty_value(&self.inner, &r).map_err(to_py)
    }

    fn gradient(&self, residual: Vec<Complex64>, n_recv: usize, n_src: usize) -> PyResult<Vec<Complex64>> {
        let r = ResidualMatrix::new(n_recv, n_src, 0.0, residual).map_err(to_py)?;
        Ok(penalty_gradient(&self.inner, &r).map_err(to_py)?.into_entries())
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

#[pyclass(name = "Regularizer", module = "fwiprox", frozen)]
pub struct PyRegularizer {
    inner: RegularizerKind,
}

impl PyRegularizer {
    fn checked(inner: RegularizerKind) -> PyResult<Self> {
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }
}

#[pymethods]
impl PyRegularizer {
    #[staticmethod]
    fn zero() -> Self {
        Self { inner: RegularizerKind::Zero }
    }

    #[staticmethod]
    #[pyo3(name = "box")]
    fn box_(lo: Vec<f64>, hi: Vec<f64>) -> PyResult<Self> {
        Self::checked(RegularizerKind::Box { lo, hi })
    }

    #[staticmethod]
    fn l1_penalty(lam: f64) -> PyResult<Self> {
        Self::checked(RegularizerKind::L1Penalty { lambda: lam })
    }

    #[staticmethod]
    fn l1_ball(tau: f64) -> PyResult<Self> {
        Self::checked(RegularizerKind::L1Ball { tau })
    }

    #[staticmethod]
    fn tv1d(lam: f64) -> PyResult<Self> {
        Self::checked(RegularizerKind::Tv1d { lambda: lam })
    }

    #[staticmethod]
    fn tv2d(lam: f64, nz: usize, nx: usize) -> PyResult<Self> {
        Self::checked(RegularizerKind::Tv2dAnisotropic { lambda: lam, nz, nx })
    }

    fn value(&self, y: Vec<f64>) -> PyResult<f64> {
        reg_value(&self.inner, &y).map_err(to_py)
    }

    /// Minimizer of `1/2 ||g - y||^2 + t R(g)`.
    #[pyo3(signature = (y, t = 1.0))]
    fn prox(&self, y: Vec<f64>, t: f64) -> PyResult<Vec<f64>> {
        prox(&self.inner, &y, t).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

#[pyclass(name = "Transform", module = "fwiprox", frozen)]
pub struct PyTransform {
    inner: TransformKind,
}

#[pymethods]
impl PyTransform {
    #[staticmethod]
    fn identity() -> Self {
        Self { inner: TransformKind::Identity }
    }

    #[staticmethod]
    fn haar(levels: usize, nz: usize, nx: usize) -> PyResult<Self> {
        Ok(Self { inner: TransformKind::haar(levels, nz, nx).map_err(to_py)? })
    }

    /// Synthesis `m = C y`.
    fn apply(&self, y: Vec<f64>) -> PyResult<Vec<f64>> {
        transforms::apply(&self.inner, &y).map_err(to_py)
    }

    /// Analysis `C^T m`.
    fn adjoint(&self, m: Vec<f64>) -> PyResult<Vec<f64>> {
        transforms::adjoint(&self.inner, &m).map_err(to_py)
    }
}

#[pyclass(name = "LbfgsMemory", module = "fwiprox")]
pub struct PyLbfgsMemory {
    inner: LbfgsMemory,
}

#[pymethods]
impl PyLbfgsMemory {
    #[new]
    #[pyo3(signature = (capacity = 10))]
    fn new(capacity: usize) -> Self {
        Self { inner: LbfgsMemory::new(capacity) }
    }

    /// Returns whether the pair passed the curvature test.
    fn update(&mut self, s: Vec<f64>, t: Vec<f64>) -> PyResult<bool> {
        self.inner.update(&s, &t).map_err(to_py)
    }

    fn hessian_apply(&self, d: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.hessian_apply(&d).map_err(to_py)
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }

    #[getter]
    fn skipped(&self) -> usize {
        self.inner.skipped()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Squared-slowness model on an `nz x nx` grid, z fastest.
#[pyclass(name = "Model", module = "fwiprox", frozen)]
pub struct PyModel {
    inner: GridModel2D,
}

#[pymethods]
impl PyModel {
    #[new]
    fn new(nz: usize, nx: usize, h: f64, values: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: GridModel2D::new(nz, nx, h, values).map_err(to_py)? })
    }

    #[staticmethod]
    fn constant(nz: usize, nx: usize, h: f64, value: f64) -> PyResult<Self> {
        Ok(Self { inner: GridModel2D::constant(nz, nx, h, value).map_err(to_py)? })
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: io::read_model(&path).map_err(to_py)? })
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        io::write_model(&path, &self.inner).map_err(to_py)
    }

    #[getter]
    fn nz(&self) -> usize {
        self.inner.nz()
    }

    #[getter]
    fn nx(&self) -> usize {
        self.inner.nx()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }
}

#[pyclass(name = "Geometry", module = "fwiprox", frozen)]
pub struct PyGeometry {
    inner: AcquisitionGeometry,
}

#[pymethods]
impl PyGeometry {
    /// Points are `(iz, ix)` pairs; `omegas` in rad/s.
    #[new]
    #[pyo3(signature = (sources, receivers, omegas, sponge_width = 10, gamma_max = 1.0))]
    fn new(
        sources: Vec<(usize, usize)>,
        receivers: Vec<(usize, usize)>,
        omegas: Vec<f64>,
        sponge_width: usize,
        gamma_max: f64,
    ) -> Self {
        let pts = |v: Vec<(usize, usize)>| v.into_iter().map(|(iz, ix)| GridPoint::new(iz, ix)).collect();
        Self {
            inner: AcquisitionGeometry::new(
                pts(sources),
                pts(receivers),
                omegas,
                Sponge {
                    width: sponge_width,
                    gamma_max,
                },
            ),
        }
    }

    #[getter]
    fn n_src(&self) -> usize {
        self.inner.n_src()
    }

    #[getter]
    fn n_recv(&self) -> usize {
        self.inner.n_recv()
    }
}

/// Per-frequency data matrices `n_recv x n_src`, receiver fastest.
#[pyfunction]
fn predict_data(model: &PyModel, geometry: &PyGeometry) -> PyResult<Vec<Vec<Complex64>>> {
    let d = fwi_predict(&model.inner, &geometry.inner).map_err(to_py)?;
    Ok((0..d.n_freq()).map(|k| d.matrix(k).to_vec()).collect())
}

/// `(value, gradient)` of the misfit with respect to the model.
#[pyfunction]
#[pyo3(signature = (model, geometry, data, penalty, weights = None))]
fn misfit_gradient(
    model: &PyModel,
    geometry: &PyGeometry,
    data: Vec<Vec<Complex64>>,
    penalty: &PyPenalty,
    weights: Option<Vec<f64>>,
) -> PyResult<(f64, Vec<f64>)> {
    let g = &geometry.inner;
    let observed = FrequencyData::new(g.n_recv(), g.n_src(), g.omegas.clone(), data).map_err(to_py)?;
    let w = weights.unwrap_or_else(|| vec![1.0; g.omegas.len()]);
    let eval = misfit_and_gradient(&model.inner, g, &observed, &penalty.inner, &w, true).map_err(to_py)?;
    Ok((eval.value, eval.gradient.unwrap_or_default()))
}

/// Runs an inversion from a JSON config and returns the summary as JSON.
#[pyfunction]
#[pyo3(signature = (config_json, output_dir = None, threads = None))]
fn run(py: Python<'_>, config_json: &str, output_dir: Option<PathBuf>, threads: Option<usize>) -> PyResult<String> {
    let mut cfg = ExperimentConfig::from_json(config_json).map_err(to_py)?;
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    let art = py
        .detach(|| run_experiment(&cfg, RunOptions { threads }))
        .map_err(to_py)?;
    serde_json::to_string(&art.summary).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Largest relative error between adjoint and finite-difference gradients.
#[pyfunction]
#[pyo3(signature = (seed = 0, coords = 5))]
fn gradient_check(seed: u64, coords: usize) -> PyResult<f64> {
    let cases = gradient_check_suite(seed, coords).map_err(to_py)?;
    Ok(cases.iter().map(|c| c.max_rel_err).fold(0.0, f64::max))
}

/// Adds the classes and functions to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPenalty>()?;
    m.add_class::<PyRegularizer>()?;
    m.add_class::<PyTransform>()?;
    m.add_class::<PyLbfgsMemory>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyGeometry>()?;
    m.add_function(wrap_pyfunction!(predict_data, m)?)?;
    m.add_function(wrap_pyfunction!(misfit_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(gradient_check, m)?)?;
    Ok(())
}

#[pymodule]
#[pyo3(name = "fwiprox")]
fn fwiprox_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}
