//! Python bindings: `import icp_lab`.

use std::sync::Arc;

use icp_core::axioms::{axiom_suite as core_axiom_suite, EntropyKind};
use icp_core::catalog;
use icp_core::constructions as cons;
use icp_core::ensemble::{evaluate_icp, CorrelatedEnsemble, ICPReport, ObservableAssignment};
use icp_core::gpt::{measure, NormExponent};
use icp_core::optimize::{maximize_extractable as core_maximize, OptimizerConfig, Strategy};
use icp_core::proof_chain::proof_chain_check;
use icp_core::schema::{load_ensemble, CertificateDoc, EnsembleDoc};
use icp_core::IcpError;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

fn err(e: IcpError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Converts any serializable value into plain Python objects via `json.loads`.
fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn norm(p: f64) -> PyResult<NormExponent> {
    NormExponent::new(p).map_err(err)
}

#[pyclass(frozen, name = "Theory")]
struct PyTheory {
    inner: Arc<icp_core::gpt::Theory>,
}

#[pymethods]
impl PyTheory {
    /// Catalog theory by id, e.g. `"sbit"`, `"qubit"`, `"polygon:6"`, `"pgnst:3:2"`.
    #[staticmethod]
    fn lookup(id: &str) -> PyResult<Self> {
        Ok(Self {
            inner: catalog::lookup(id).map_err(err)?.theory,
        })
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id().to_string()
    }

    #[getter]
    fn ambient_dim(&self) -> usize {
        self.inner.ambient_dim()
    }

    #[getter]
    fn measurements(&self) -> Vec<String> {
        self.inner.measurement_names().iter().map(|s| s.to_string()).collect()
    }

    fn observed_dimension(&self) -> PyResult<usize> {
        Ok(self.inner.observed_dimension().map_err(err)?.d)
    }

    /// Outcome probabilities of `measurement` on the state with coordinates `coords`.
    fn probabilities(&self, measurement: &str, coords: Vec<f64>) -> PyResult<Vec<f64>> {
        let m = self.inner.measurement(measurement).map_err(err)?;
        let s = self.inner.state(coords).map_err(err)?;
        Ok(measure(&self.inner, &m, &s).map_err(err)?.probs().to_vec())
    }

    fn __repr__(&self) -> String {
        format!("Theory('{}')", self.inner.id())
    }
}

#[pyclass(frozen, name = "Report")]
struct PyReport {
    inner: ICPReport,
}

#[pymethods]
impl PyReport {
    #[getter]
    fn measurements(&self) -> Vec<String> {
        self.inner.measurements.clone()
    }

    #[getter]
    fn gains(&self) -> Vec<f64> {
        self.inner.gains.clone()
    }

    #[getter]
    fn redundancy(&self) -> f64 {
        self.inner.redundancy
    }

    #[getter]
    fn extractable(&self) -> f64 {
        self.inner.extractable
    }

    #[getter]
    fn bound(&self) -> f64 {
        self.inner.bound
    }

    #[getter]
    fn margin(&self) -> f64 {
        self.inner.margin
    }

    #[getter]
    fn violated(&self) -> bool {
        self.inner.violated
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "Report(extractable={}, bound={}, violated={})",
            self.inner.extractable, self.inner.bound, self.inner.violated
        )
    }
}

#[pyclass(frozen, name = "Ensemble")]
struct PyEnsemble {
    inner: CorrelatedEnsemble,
    assignment: Option<ObservableAssignment>,
}

#[pymethods]
impl PyEnsemble {
    /// Parses an ensemble, certificate or CLI output document.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let loaded = load_ensemble(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self {
            inner: loaded.ensemble,
            assignment: loaded.assignment,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&EnsembleDoc::from_ensemble(&self.inner, self.assignment.as_ref()))
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn theory(&self) -> String {
        self.inner.theory().id().to_string()
    }

    fn __len__(&self) -> usize {
        self.inner.entries().len()
    }

    /// ICP report; `measurements` defaults to the ones stored with the ensemble.
    #[pyo3(signature = (measurements=None))]
    fn evaluate(&self, measurements: Option<Vec<String>>) -> PyResult<PyReport> {
        let asg = self.resolve(measurements)?;
        Ok(PyReport {
            inner: evaluate_icp(&self.inner, &asg).map_err(err)?,
        })
    }

    /// Step-by-step check of the ICP bound (classical and quantum theories).
    #[pyo3(signature = (measurements=None))]
    fn proof_chain(&self, py: Python<'_>, measurements: Option<Vec<String>>) -> PyResult<Py<PyAny>> {
        let asg = self.resolve(measurements)?;
        to_py(py, &proof_chain_check(&self.inner, &asg).map_err(err)?)
    }
}

impl PyEnsemble {
    fn resolve(&self, measurements: Option<Vec<String>>) -> PyResult<ObservableAssignment> {
        match (measurements, &self.assignment) {
            (Some(m), _) => {
                let refs: Vec<&str> = m.iter().map(String::as_str).collect();
                ObservableAssignment::from_names(self.inner.theory(), &refs).map_err(err)
            }
            (None, Some(a)) => Ok(a.clone()),
            (None, None) => Err(PyValueError::new_err("no measurements given or stored")),
        }
    }
}

/// Summaries of every catalog theory.
#[pyfunction]
fn catalog_list(py: Python<'_>) -> PyResult<Py<PyAny>> {
    let rows = catalog::list()
        .and_then(|l| l.iter().map(|e| e.summary()).collect::<Result<Vec<_>, _>>())
        .map_err(err)?;
    to_py(py, &rows)
}

/// Certificate of a named construction: sbit, hbit, classical or qubit-rac.
#[pyfunction]
#[pyo3(signature = (name, seed=42))]
fn demo(py: Python<'_>, name: &str, seed: u64) -> PyResult<Py<PyAny>> {
    let cert = match name {
        "sbit" => cons::sbit_violation(),
        "hbit" => cons::hbit_violation(),
        "classical" => cons::classical_bit_certificate(&OptimizerConfig {
            seed,
            ..OptimizerConfig::default()
        }),
        "qubit-rac" => cons::qubit_rac_construction(),
        other => return Err(PyValueError::new_err(format!("unknown demo `{other}`"))),
    }
    .map_err(err)?;
    to_py(py, &CertificateDoc::from_certificate(&cert))
}

/// Polygon construction report for `n ≥ 3`.
#[pyfunction]
fn polygon_violation(n: usize) -> PyResult<PyReport> {
    Ok(PyReport {
        inner: cons::polygon_violation(n).map_err(err)?.report,
    })
}

/// `(s_x, s_z, H(X)+H(Z))` at the minimum over the saturating boundary.
#[pyfunction]
fn pgnst_min_entropy_sum(p: f64) -> PyResult<(f64, f64, f64)> {
    let m = cons::pgnst_min_entropy_sum(norm(p)?, &cons::PgnstSearchConfig::default()).map_err(err)?;
    Ok((m.s_x, m.s_z, m.h_tilde))
}

#[pyfunction]
fn pgnst_violation(p: f64) -> PyResult<PyReport> {
    Ok(PyReport {
        inner: cons::pgnst_violation(norm(p)?, &cons::PgnstSearchConfig::default())
            .map_err(err)?
            .report,
    })
}

#[pyfunction]
fn composite_gbit_extractable(py: Python<'_>, n: usize) -> PyResult<Py<PyAny>> {
    to_py(py, &cons::composite_gbit_extractable(n).map_err(err)?)
}

#[pyfunction]
fn polygon_mismatch(py: Python<'_>, n: usize) -> PyResult<Py<PyAny>> {
    to_py(py, &cons::polygon_mismatch(n).map_err(err)?)
}

/// Randomized entropy-axiom checks; `kind` is `"shannon"` or `"von_neumann"`.
#[pyfunction]
#[pyo3(signature = (kind, trials, seed=42))]
fn axiom_suite(py: Python<'_>, kind: &str, trials: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let k: EntropyKind = kind.parse().map_err(err)?;
    to_py(py, &core_axiom_suite(k, trials, seed).map_err(err)?)
}

/// Searches encodings of the theory's registers for the largest extractable information.
#[pyfunction]
#[pyo3(signature = (theory, measurements, seed=42, max_evals=200_000, restarts=4))]
fn maximize_extractable(
    theory: &str,
    measurements: Vec<String>,
    seed: u64,
    max_evals: usize,
    restarts: usize,
) -> PyResult<(PyReport, PyEnsemble)> {
    let t = catalog::lookup(theory).map_err(err)?.theory;
    let refs: Vec<&str> = measurements.iter().map(String::as_str).collect();
    let asg = ObservableAssignment::from_names(&t, &refs).map_err(err)?;
    let cfg = OptimizerConfig {
        strategy: Strategy::CoordinateDescent,
        seed,
        max_evals,
        restarts,
        ..OptimizerConfig::default()
    };
    let res = core_maximize(&t, &asg, &cfg).map_err(err)?;
    Ok((
        PyReport { inner: res.report },
        PyEnsemble {
            inner: res.ensemble,
            assignment: Some(asg),
        },
    ))
}

#[pymodule]
fn icp_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTheory>()?;
    m.add_class::<PyEnsemble>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(catalog_list, m)?)?;
    m.add_function(wrap_pyfunction!(demo, m)?)?;
    m.add_function(wrap_pyfunction!(polygon_violation, m)?)?;
    m.add_function(wrap_pyfunction!(pgnst_min_entropy_sum, m)?)?;
    m.add_function(wrap_pyfunction!(pgnst_violation, m)?)?;
    m.add_function(wrap_pyfunction!(composite_gbit_extractable, m)?)?;
    m.add_function(wrap_pyfunction!(polygon_mismatch, m)?)?;
    m.add_function(wrap_pyfunction!(axiom_suite, m)?)?;
    m.add_function(wrap_pyfunction!(maximize_extractable, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
