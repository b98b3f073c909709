//! Python module `superloc`: expressions, superfunctions, the exact Pfaffian and
//! superdeterminant, rank bookkeeping and the scenario runner.

use std::collections::BTreeMap;
use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use superloc::error::Error;
use superloc::harness::{self, HarnessError};
use superloc::linalg::Matrix;
use superloc::scalar::{Binding, ScalarExpr};
use superloc::superalg::{SuperChart, SuperFunction};

fn err(e: Error) -> PyErr {
    match e {
        Error::Parse { .. } | Error::Schema(_) | Error::UnboundSymbol(_) | Error::ShapeMismatch(_) | Error::DimensionMismatch(_) => {
            PyValueError::new_err(e.to_string())
        }
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn harness_err(e: HarnessError) -> PyErr {
    match e {
        HarnessError::Schema(m) => PyValueError::new_err(m),
        HarnessError::Computation(e) => PyRuntimeError::new_err(e.to_string()),
    }
}

fn binding(values: BTreeMap<String, f64>) -> Binding {
    values.into_iter().fold(Binding::new(), |b, (k, v)| b.with_f64(&k, v))
}

fn matrix(rows: Vec<Vec<String>>) -> PyResult<Matrix<ScalarExpr>> {
    let rows = rows
        .iter()
        .map(|r| r.iter().map(|e| ScalarExpr::parse(e)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    Matrix::from_rows(rows).map_err(|e| err(e.into()))
}

/// Canonical rational-coefficient expression.
#[pyclass(name = "Expr", module = "superloc", frozen)]
#[derive(Clone)]
struct PyExpr(ScalarExpr);

#[pymethods]
impl PyExpr {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        ScalarExpr::parse(text).map(PyExpr).map_err(err)
    }

    fn differentiate(&self, symbol: &str) -> Self {
        PyExpr(self.0.differentiate(symbol))
    }

    /// Numeric value with every free symbol bound.
    #[pyo3(signature = (values = BTreeMap::new()))]
    fn evaluate(&self, values: BTreeMap<String, f64>) -> PyResult<f64> {
        self.0.evaluate_f64(&binding(values)).map_err(err)
    }

    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    fn __add__(&self, other: &PyExpr) -> Self {
        PyExpr(&self.0 + &other.0)
    }

    fn __sub__(&self, other: &PyExpr) -> Self {
        PyExpr(&self.0 - &other.0)
    }

    fn __mul__(&self, other: &PyExpr) -> Self {
        PyExpr(&self.0 * &other.0)
    }

    fn __eq__(&self, other: &PyExpr) -> bool {
        self.0 == other.0
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Expr('{}')", self.0)
    }
}

/// Element of C^∞(U) ⊗ Λ(θ¹..θⁿ) on a chart with the given even coordinates.
#[pyclass(name = "SuperFunction", module = "superloc", frozen)]
#[derive(Clone)]
struct PySuperFunction(SuperFunction);

#[pymethods]
impl PySuperFunction {
    /// `odd` defaults to th1..thm.
    #[new]
    #[pyo3(signature = (even, text, odd = None))]
    fn new(even: Vec<String>, text: &str, odd: Option<Vec<String>>) -> PyResult<Self> {
        let odd = odd.unwrap_or_else(|| (1..=even.len()).map(|a| format!("th{a}")).collect());
        let chart: Arc<SuperChart> = SuperChart::with_odd_names(even.iter().map(|s| superloc::scalar::sym(s)).collect(), odd);
        SuperFunction::parse(&chart, text).map(PySuperFunction).map_err(err)
    }

    /// Berezin integral over the odd directions: the θ¹…θⁿ coefficient.
    fn berezin(&self) -> PyExpr {
        PyExpr(self.0.top_component())
    }

    fn body(&self) -> PyExpr {
        PyExpr(self.0.body())
    }

    fn wedge(&self, other: &PySuperFunction) -> PyResult<Self> {
        self.0.wedge(&other.0).map(PySuperFunction).map_err(err)
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }
}

/// Exact Pfaffian of a skew matrix of expression strings.
#[pyfunction]
fn pfaffian(rows: Vec<Vec<String>>) -> PyResult<String> {
    superloc::localization::pfaffian(&matrix(rows)?).map(|e| e.to_string()).map_err(err)
}

/// det(A)/det(B) for the block-diagonal even endomorphism (A, B).
#[pyfunction]
fn superdeterminant(a: Vec<Vec<String>>, b: Vec<Vec<String>>) -> PyResult<String> {
    superloc::localization::superdeterminant(&matrix(a)?, &matrix(b)?).map(|e| e.to_string()).map_err(err)
}

/// Real rank 2kN, 4kN or 8kN of the fermion bundle for 1, 2 or 4 supersymmetries.
#[pyfunction]
fn rank_bookkeeping(k: u64, n: u64, susy: u32) -> PyResult<u64> {
    superloc::adhm::rank_bookkeeping(k, n, susy).map_err(err)
}

/// Run `localize`, `oracle`, `compare` or `brst-check` on a scenario JSON text;
/// returns (exit code, report JSON).
#[pyfunction]
#[pyo3(signature = (command, scenario_json, tol = None))]
fn run_scenario(py: Python<'_>, command: &str, scenario_json: &str, tol: Option<f64>) -> PyResult<(i32, String)> {
    let cmd: harness::Command = command.parse().map_err(harness_err)?;
    let mut sc = harness::Scenario::from_json(scenario_json).map_err(harness_err)?;
    if let Some(t) = tol {
        sc.tolerances.compare = t;
    }
    let report = py.allow_threads(|| harness::run(&sc, cmd)).map_err(harness_err)?;
    Ok((report.exit_code(), report.to_json()))
}

#[pymodule]
#[pyo3(name = "superloc")]
pub fn superloc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyExpr>()?;
    m.add_class::<PySuperFunction>()?;
    m.add_function(wrap_pyfunction!(pfaffian, m)?)?;
    m.add_function(wrap_pyfunction!(superdeterminant, m)?)?;
    m.add_function(wrap_pyfunction!(rank_bookkeeping, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
