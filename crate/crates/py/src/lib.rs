//! Python bindings: objectives, the flow's vector field, the quadratic
//! closed forms, and the adaptive integrator.

use agrf_core::flow::{self, FlowMode, GaussianState};
use agrf_core::linalg::SymMatrix;
use agrf_core::moments::{self, Polynomial};
use agrf_core::objective::{self, Benchmark, QuadraticForm};
use agrf_core::ode::{self, SolverConfig};
use agrf_core::trace::{write_trace, TraceFormat};
use agrf_core::AgrfError;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

create_exception!(agrf, FlowError, PyValueError);

fn err(e: AgrfError) -> PyErr {
    FlowError::new_err(e.to_string())
}

/// A covariance given either as `s` (meaning `s·I`) or as a list of rows.
#[derive(FromPyObject)]
enum CovArg {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

impl CovArg {
    fn build(self, n: usize) -> PyResult<SymMatrix> {
        match self {
            CovArg::Scalar(s) => Ok(SymMatrix::scaled_identity(n, s)),
            CovArg::Matrix(rows) => SymMatrix::from_rows(&rows).map_err(err),
        }
    }
}

fn state(mean: Vec<f64>, cov: CovArg) -> PyResult<GaussianState> {
    let n = mean.len();
    GaussianState::new(mean, cov.build(n)?).map_err(err)
}

fn mode(name: &str) -> PyResult<FlowMode> {
    match name {
        "full" => Ok(FlowMode::Full),
        "diag" => Ok(FlowMode::Diagonal),
        _ => Err(PyValueError::new_err(format!("mode must be 'full' or 'diag', got {name:?}"))),
    }
}

/// An objective: a polynomial plus cosine terms.
#[pyclass(name = "Objective", module = "agrf", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyObjective {
    inner: objective::Objective,
}

#[pymethods]
impl PyObjective {
    /// Built-in benchmark by name, e.g. `"styblinski-tang"`.
    #[staticmethod]
    #[pyo3(signature = (name, n = 2))]
    fn benchmark(name: &str, n: usize) -> PyResult<Self> {
        let b = Benchmark::from_name(name).ok_or_else(|| PyValueError::new_err(format!("unknown benchmark {name:?}")))?;
        Ok(PyObjective { inner: b.build(n).map_err(err)? })
    }

    /// Objective-file JSON document.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyObjective { inner: objective::parse_objective(text).map_err(err)? })
    }

    /// `xᵀAx + bᵀx + c`
    #[staticmethod]
    fn quadratic(a: Vec<Vec<f64>>, b: Vec<f64>, c: f64) -> PyResult<Self> {
        let a = SymMatrix::from_rows(&a).map_err(err)?;
        let qf = QuadraticForm::new(a, b, c).map_err(err)?;
        Ok(PyObjective { inner: qf.to_objective() })
    }

    /// Polynomial from `(coefficient, exponents)` pairs.
    #[staticmethod]
    fn polynomial(n: usize, terms: Vec<(f64, Vec<u32>)>) -> PyResult<Self> {
        let p = Polynomial::from_terms(n, terms).map_err(err)?;
        Ok(PyObjective { inner: objective::Objective::from_polynomial(p) })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn is_quadratic(&self) -> bool {
        self.inner.as_quadratic().is_some()
    }

    fn evaluate(&self, x: Vec<f64>) -> PyResult<f64> {
        check_len(self.inner.dim(), x.len())?;
        Ok(self.inner.evaluate(&x))
    }

    fn gradient(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        check_len(self.inner.dim(), x.len())?;
        Ok(self.inner.gradient(&x))
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __repr__(&self) -> String {
        format!("Objective(n={}, json={})", self.inner.dim(), self.inner.to_json())
    }
}

fn check_len(expected: usize, got: usize) -> PyResult<()> {
    if expected == got {
        Ok(())
    } else {
        Err(err(AgrfError::DimensionMismatch { expected, got }))
    }
}

/// Result of `integrate`.
#[pyclass(name = "Trajectory", module = "agrf", frozen)]
struct PyTrajectory {
    inner: ode::Trajectory,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn termination(&self) -> &'static str {
        self.inner.termination.name()
    }

    #[getter]
    fn accepted_steps(&self) -> usize {
        self.inner.accepted_steps
    }

    #[getter]
    fn rejected_steps(&self) -> usize {
        self.inner.rejected_steps
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.points.iter().map(|p| p.t).collect()
    }

    #[getter]
    fn means(&self) -> Vec<Vec<f64>> {
        self.inner.points.iter().map(|p| p.mean.clone()).collect()
    }

    #[getter]
    fn covs(&self) -> Vec<Vec<Vec<f64>>> {
        self.inner.points.iter().map(|p| p.cov.to_rows()).collect()
    }

    #[getter]
    fn f_at_mean(&self) -> Vec<f64> {
        self.inner.points.iter().map(|p| p.f_at_mean).collect()
    }

    #[getter]
    fn expected_f(&self) -> Vec<f64> {
        self.inner.points.iter().map(|p| p.expected_f).collect()
    }

    #[getter]
    fn det_cov(&self) -> Vec<f64> {
        self.inner.points.iter().map(|p| p.det_cov).collect()
    }

    #[getter]
    fn final_mean(&self) -> Vec<f64> {
        self.inner.last().mean.clone()
    }

    /// Trace text in `"jsonl"` or `"csv"` format.
    #[pyo3(signature = (format = "jsonl"))]
    fn to_trace(&self, format: &str) -> PyResult<String> {
        let fmt = TraceFormat::from_name(format)
            .ok_or_else(|| PyValueError::new_err(format!("format must be 'jsonl' or 'csv', got {format:?}")))?;
        let mut buf = Vec::new();
        write_trace(&self.inner.points, fmt, &mut buf).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(String::from_utf8(buf).expect("trace text is ASCII"))
    }

    fn __len__(&self) -> usize {
        self.inner.points.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Trajectory(points={}, termination={}, final_mean={:?})",
            self.inner.points.len(),
            self.inner.termination,
            self.inner.last().mean
        )
    }
}

/// `(d_mean, d_cov)` at `N(mean, cov)`.
#[pyfunction]
#[pyo3(signature = (obj, mean, cov, mode = "full"))]
fn rhs(obj: &PyObjective, mean: Vec<f64>, cov: CovArg, mode: &str) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let d = flow::agrf_rhs(&obj.inner, &state(mean, cov)?, self::mode(mode)?).map_err(err)?;
    Ok((d.d_mean, d.d_cov.to_rows()))
}

#[pyfunction]
fn expected_value(obj: &PyObjective, mean: Vec<f64>, cov: CovArg) -> PyResult<f64> {
    flow::expected_value(&obj.inner, &state(mean, cov)?).map_err(err)
}

/// `E[p(x)]` for a polynomial given as `(coefficient, exponents)` pairs.
#[pyfunction]
fn expect_polynomial(terms: Vec<(f64, Vec<u32>)>, mean: Vec<f64>, cov: CovArg) -> PyResult<f64> {
    let n = mean.len();
    let p = Polynomial::from_terms(n, terms).map_err(err)?;
    moments::expect_polynomial(&p, &mean, &cov.build(n)?).map_err(err)
}

fn quadratic(obj: &PyObjective) -> PyResult<QuadraticForm> {
    obj.inner
        .as_quadratic()
        .ok_or_else(|| PyValueError::new_err("objective is not quadratic"))
}

/// Closed-form `(m(t), C(t))` for a quadratic objective.
#[pyfunction]
fn analytic(obj: &PyObjective, m0: Vec<f64>, c0: CovArg, t: f64) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let qf = quadratic(obj)?;
    let c0 = c0.build(m0.len())?;
    let m = flow::analytic_mean(&qf, &m0, &c0, t).map_err(err)?;
    let c = flow::analytic_cov(&qf, &c0, t).map_err(err)?;
    Ok((m, c.to_rows()))
}

#[pyfunction]
fn quadratic_limit(obj: &PyObjective) -> PyResult<Vec<f64>> {
    flow::quadratic_limit(&quadratic(obj)?).map_err(err)
}

#[pyfunction]
fn descent_rate(obj: &PyObjective, mean: Vec<f64>, cov: CovArg) -> PyResult<f64> {
    flow::descent_rate(&obj.inner, &state(mean, cov)?).map_err(err)
}

#[pyfunction]
fn approx_descent_functional(obj: &PyObjective, mean: Vec<f64>, cov: CovArg) -> PyResult<f64> {
    flow::approx_descent_functional(&obj.inner, &state(mean, cov)?).map_err(err)
}

/// Integrates the flow from `N(mean, cov)`.
#[pyfunction]
#[pyo3(signature = (
    obj, mean, cov, *, t_max = 30.0, det_eps = 1e-4, rtol = 1e-3, atol = 1e-6,
    max_steps = 100_000, mode = "full"
))]
#[allow(clippy::too_many_arguments)]
fn integrate(
    py: Python<'_>,
    obj: &PyObjective,
    mean: Vec<f64>,
    cov: CovArg,
    t_max: f64,
    det_eps: f64,
    rtol: f64,
    atol: f64,
    max_steps: usize,
    mode: &str,
) -> PyResult<PyTrajectory> {
    let s = state(mean, cov)?;
    let config = SolverConfig {
        t_max,
        det_eps,
        rtol,
        atol,
        max_steps,
        record_every_step: true,
    };
    let mode = self::mode(mode)?;
    let f = obj.inner.clone();
    let inner = py.detach(move || ode::integrate(&f, &s, &config, mode)).map_err(err)?;
    Ok(PyTrajectory { inner })
}

#[pyfunction]
fn benchmarks() -> Vec<&'static str> {
    Benchmark::ALL.iter().map(|b| b.name()).collect()
}

#[pymodule]
fn agrf(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("FlowError", m.py().get_type::<FlowError>())?;
    m.add_class::<PyObjective>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(rhs, m)?)?;
    m.add_function(wrap_pyfunction!(expected_value, m)?)?;
    m.add_function(wrap_pyfunction!(expect_polynomial, m)?)?;
    m.add_function(wrap_pyfunction!(analytic, m)?)?;
    m.add_function(wrap_pyfunction!(quadratic_limit, m)?)?;
    m.add_function(wrap_pyfunction!(descent_rate, m)?)?;
    m.add_function(wrap_pyfunction!(approx_descent_functional, m)?)?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(benchmarks, m)?)?;
    Ok(())
}
