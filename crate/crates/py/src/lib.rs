//! Python bindings: sessions, model artifacts, benchmark functions and the
//! comparison runner. Structured results cross the boundary as plain dicts
//! and lists built from the same JSON shapes the CLI prints.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::Serialize;

use ared_core::benchmarks::{self, BenchFunction};
use ared_core::controller::{self, Session as CoreSession};
use ared_core::error::AredError;
use ared_core::io::{self, ModelArtifact, SessionRequest};
use ared_core::metrics::{self, ErrorReference};

create_exception!(ared, Error, PyException, "Base class for engine errors.");
create_exception!(ared, WrongStateError, Error, "Operation not allowed in the current session state.");
create_exception!(ared, DocumentError, Error, "Corrupt or incompatible session/model document.");

fn py_err(e: AredError) -> PyErr {
    match e {
        AredError::WrongState { .. } => WrongStateError::new_err(e.to_string()),
        AredError::CorruptDocument(_) | AredError::SchemaMismatch { .. } => {
            DocumentError::new_err(e.to_string())
        }
        _ => Error::new_err(e.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| Error::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn function_of(name: &str) -> PyResult<BenchFunction> {
    name.parse()
        .map_err(|e: String| pyo3::exceptions::PyValueError::new_err(e))
}

/// One adaptive design session. Alternate `propose()` and `record(value)`
/// until `converged`.
#[pyclass(module = "ared")]
struct Session {
    inner: CoreSession,
}

#[pymethods]
impl Session {
    /// Opens a session on `bounds` (one `(low, high)` pair per variable).
    /// `initial` holds `(coords, value)` pairs and must cover every corner.
    #[new]
    #[pyo3(signature = (bounds, initial, seed=0))]
    fn new(bounds: Vec<(f64, f64)>, initial: Vec<(Vec<f64>, f64)>, seed: u64) -> PyResult<Self> {
        let request = SessionRequest {
            bounds: Some(bounds),
            seed,
            initial: initial
                .into_iter()
                .map(|(coords, value)| io::InitialPoint { coords, value })
                .collect(),
            ..SessionRequest::default()
        };
        Ok(Self {
            inner: request.start().map_err(py_err)?,
        })
    }

    /// Opens a session from the same JSON request accepted by the CLI and
    /// `POST /sessions`.
    #[staticmethod]
    fn from_request(text: &str) -> PyResult<Self> {
        let request: SessionRequest = serde_json::from_str(text)
            .map_err(|e| pyo3::exceptions::PyValueError::new_err(e.to_string()))?;
        Ok(Self {
            inner: request.start().map_err(py_err)?,
        })
    }

    /// Draws the next case. Returns a dict with `coords`, `predicted`,
    /// `provenance`, and the constraint audit `d` / `threshold`.
    fn propose<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let p = self.inner.propose_next().map_err(py_err)?;
        let view = serde_json::json!({
            "coords": p.sample.coords,
            "predicted": p.predicted,
            "provenance": p.sample.provenance,
            "d": p.audit.distance,
            "threshold": p.audit.threshold,
            "attempts": p.audit.attempts,
        });
        to_py(py, &view)
    }

    /// Records the measurement of the pending case and refits.
    fn record<'py>(&mut self, py: Python<'py>, value: f64) -> PyResult<Bound<'py, PyAny>> {
        let inner = &mut self.inner;
        let rec = py.detach(|| inner.record_result(value).cloned()).map_err(py_err)?;
        let view = serde_json::json!({
            "iteration": rec.iteration,
            "archive_size": rec.archive_size,
            "mae": rec.report.mae,
            "mape": rec.report.mape,
            "r": rec.report.r,
            "c": rec.hyperparams.c,
            "gamma": rec.hyperparams.gamma,
            "passed": rec.passed,
            "feedback": rec.feedback.map(|f| f.coords),
            "converged": self.inner.is_converged(),
        });
        to_py(py, &view)
    }

    /// Surrogate prediction at `coords`.
    fn predict(&self, coords: Vec<f64>) -> PyResult<f64> {
        let model = self
            .inner
            .model
            .as_ref()
            .ok_or_else(|| Error::new_err("session has no model"))?;
        if coords.len() != self.inner.config.domain.dim() {
            return Err(py_err(AredError::DimensionMismatch {
                expected: self.inner.config.domain.dim(),
                got: coords.len(),
            }));
        }
        Ok(model.predict(&coords))
    }

    #[getter]
    fn status(&self) -> &'static str {
        self.inner.status.as_str()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.is_converged()
    }

    /// Archive as `(coords, value, provenance)` tuples.
    #[getter]
    fn archive(&self) -> Vec<(Vec<f64>, Option<f64>, &'static str)> {
        self.inner
            .archive
            .iter()
            .map(|s| (s.coords.clone(), s.value, s.provenance.as_str()))
            .collect()
    }

    #[getter]
    fn history<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.history)
    }

    fn to_json(&self) -> PyResult<String> {
        io::session_to_string(&self.inner).map_err(py_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: io::session_from_str(text).map_err(py_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        io::save_session(&self.inner, path).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: io::load_session(path).map_err(py_err)?,
        })
    }

    /// Model artifact of the current surrogate; needs convergence unless
    /// `force` is set.
    #[pyo3(signature = (force=false))]
    fn export_model(&self, force: bool) -> PyResult<Model> {
        Ok(Model {
            inner: io::export_model(&self.inner, force).map_err(py_err)?,
        })
    }

    fn __repr__(&self) -> String {
        let c = self.inner.case_counts();
        format!(
            "Session(status={}, initial={}, drawn={}, feedback={})",
            self.inner.status.as_str(),
            c.initial,
            c.drawn,
            c.feedback
        )
    }
}

/// A frozen surrogate loaded from or exported to a model artifact.
#[pyclass(module = "ared")]
struct Model {
    inner: ModelArtifact,
}

#[pymethods]
impl Model {
    fn predict(&self, coords: Vec<f64>) -> f64 {
        self.inner.predict(&coords)
    }

    /// `(C, gamma, epsilon)`; epsilon is in standardized response units.
    #[getter]
    fn hyperparams(&self) -> (f64, f64, f64) {
        let hp = self.inner.hyperparams;
        (hp.c, hp.gamma, hp.epsilon)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(py_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ModelArtifact::from_json(text).map_err(py_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ModelArtifact::load(path).map_err(py_err)?,
        })
    }
}

#[pyfunction]
fn peaks(x: f64, y: f64) -> f64 {
    benchmarks::peaks(x, y)
}

#[pyfunction]
fn bimodal_surface(x: f64, y: f64) -> f64 {
    benchmarks::bimodal_surface(x, y)
}

#[pyfunction]
fn bimodal_gaussian(x: f64) -> f64 {
    benchmarks::bimodal_gaussian(x)
}

/// Evaluates a named benchmark function (`gauss2d`, `surface3d`, `peaks`).
#[pyfunction]
fn evaluate(function: &str, coords: Vec<f64>) -> PyResult<f64> {
    let f = function_of(function)?;
    if coords.len() != f.domain().dim() {
        return Err(py_err(AredError::DimensionMismatch {
            expected: f.domain().dim(),
            got: coords.len(),
        }));
    }
    Ok(f.eval(&coords))
}

/// Runs `trials` seeded adaptive sessions against the matched baseline and
/// returns the table rows as dicts.
#[pyfunction]
#[pyo3(signature = (function, trials=10, seed=1))]
fn run_comparison<'py>(
    py: Python<'py>,
    function: &str,
    trials: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let f = function_of(function)?;
    let table = py
        .detach(|| benchmarks::run_comparison(f, trials, seed))
        .map_err(py_err)?;
    to_py(py, &table.rows)
}

/// Runs one autonomous session on a benchmark function from its corners.
#[pyfunction]
#[pyo3(signature = (function, seed=1))]
fn run_autonomous(py: Python<'_>, function: &str, seed: u64) -> PyResult<Session> {
    let f = function_of(function)?;
    let report = py
        .detach(|| {
            let config = benchmarks::benchmark_config(f, seed);
            let mut oracle = |c: &[f64]| f.eval(c);
            let initial = controller::corner_samples(&config.domain, &mut oracle);
            controller::run_autonomous(config, initial, &mut oracle)
        })
        .map_err(py_err)?;
    Ok(Session {
        inner: report.session,
    })
}

/// MAE, MAPE and R of `predicted` against `actual`.
#[pyfunction]
fn error_metrics<'py>(
    py: Python<'py>,
    predicted: Vec<f64>,
    actual: Vec<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let r = metrics::error_report(&predicted, &actual, ErrorReference::VerificationSet)
        .map_err(py_err)?;
    to_py(
        py,
        &serde_json::json!({"mae": r.mae, "mape": r.mape, "r": r.r}),
    )
}

#[pymodule]
fn ared(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Session>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(peaks, m)?)?;
    m.add_function(wrap_pyfunction!(bimodal_surface, m)?)?;
    m.add_function(wrap_pyfunction!(bimodal_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(run_comparison, m)?)?;
    m.add_function(wrap_pyfunction!(run_autonomous, m)?)?;
    m.add_function(wrap_pyfunction!(error_metrics, m)?)?;
    let py = m.py();
    m.add("Error", py.get_type::<Error>())?;
    m.add("WrongStateError", py.get_type::<WrongStateError>())?;
    m.add("DocumentError", py.get_type::<DocumentError>())?;
    Ok(())
}
