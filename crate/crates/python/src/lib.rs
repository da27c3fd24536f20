//! Python module `bianchi_py`: curvature operators, the reaction ODE and the command runner.

use bianchi_core::{bianchi, commands, convexity, ode, report::RunConfig, Error, SeedStream};
use nalgebra::DMatrix;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

fn to_py_err(e: Error) -> PyErr {
    match commands::exit_code(&e) {
        64 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn value_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(a) => {
            let list = PyList::empty(py);
            for x in a {
                list.append(value_to_py(py, x)?)?;
            }
            list.into_any()
        }
        Value::Object(m) => {
            let d = PyDict::new(py);
            for (k, x) in m {
                d.set_item(k, value_to_py(py, x)?)?;
            }
            d.into_any()
        }
    })
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("expected a square matrix"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Symmetric operator on Λ²Rⁿ in the orthonormal wedge basis.
#[pyclass(name = "CurvatureOperator", module = "bianchi_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCurvature {
    inner: bianchi_core::CurvatureOperator,
}

#[pymethods]
impl PyCurvature {
    /// Build from `n` and a symmetric matrix of size n(n−1)/2.
    #[new]
    fn new(n: usize, matrix: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = bianchi_core::CurvatureOperator::new(n, from_rows(&matrix)?).map_err(to_py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn identity(n: usize) -> Self {
        Self {
            inner: bianchi_core::CurvatureOperator::identity(n),
        }
    }

    #[staticmethod]
    fn diagonal(n: usize, values: Vec<f64>) -> PyResult<Self> {
        let inner = bianchi_core::CurvatureOperator::diagonal(n, &values).map_err(to_py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn matrix(&self) -> Vec<Vec<f64>> {
        rows(self.inner.matrix())
    }

    fn scalar(&self) -> f64 {
        self.inner.scalar()
    }

    fn norm(&self) -> f64 {
        self.inner.norm()
    }

    fn inner(&self, other: &Self) -> f64 {
        self.inner.inner(&other.inner)
    }

    fn eigenvalues(&self) -> PyResult<Vec<f64>> {
        self.inner.eigenvalues().map_err(to_py_err)
    }

    fn sharp(&self) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.sharp().map_err(to_py_err)?,
        })
    }

    /// `R² + R#`.
    fn phi(&self) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.phi().map_err(to_py_err)?,
        })
    }

    /// Pull back by an orthogonal n×n matrix.
    fn rotate(&self, q: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.rotate(&from_rows(&q)?).map_err(to_py_err)?,
        })
    }

    fn __add__(&self, other: &Self) -> Self {
        Self {
            inner: &self.inner + &other.inner,
        }
    }

    fn __sub__(&self, other: &Self) -> Self {
        Self {
            inner: &self.inner - &other.inner,
        }
    }

    fn __mul__(&self, s: f64) -> Self {
        Self {
            inner: self.inner.scale(s),
        }
    }

    fn __rmul__(&self, s: f64) -> Self {
        self.__mul__(s)
    }

    fn __repr__(&self) -> String {
        format!("CurvatureOperator(n={}, matrix={:?})", self.inner.n(), self.matrix())
    }
}

#[pyfunction]
fn b_formula(a: f64, c: f64) -> PyResult<f64> {
    ode::b_formula(a, c).map_err(to_py_err)
}

#[pyfunction]
fn eigen_ode_rhs(l: [f64; 3]) -> [f64; 3] {
    ode::eigen_ode_rhs(&l)
}

/// Dimension of the space of tuples satisfying the second Bianchi identity.
#[pyfunction]
fn bianchi_tuple_dimension(n: usize) -> PyResult<usize> {
    Ok(bianchi::tuple_space_basis(n).map_err(to_py_err)?.dim())
}

/// Integrate `R′ = R² + R#`; returns `(times, states, termination)`.
#[pyfunction]
fn integrate(r0: &PyCurvature, horizon: f64) -> PyResult<(Vec<f64>, Vec<PyCurvature>, String)> {
    let t = ode::integrate(&r0.inner, horizon, &ode::StepControl::default()).map_err(to_py_err)?;
    let states = t.states.into_iter().map(|inner| PyCurvature { inner }).collect();
    let term = serde_json::to_value(t.termination).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok((t.times, states, term.as_str().unwrap_or_default().to_string()))
}

#[pyfunction]
fn nonconvexity_witness<'py>(py: Python<'py>, a: f64, c: f64) -> PyResult<Bound<'py, PyAny>> {
    let w = convexity::nonconvexity_witness(a, c).map_err(to_py_err)?;
    value_to_py(py, &serde_json::to_value(w).expect("serializable"))
}

/// Cross-validate the eigenvalue criterion and the direct check for `f_{a,c}`.
#[pyfunction]
#[pyo3(signature = (a, c, samples = 500, rotations = 8, seed = 42))]
fn cross_validate<'py>(
    py: Python<'py>,
    a: f64,
    c: f64,
    samples: usize,
    rotations: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let f: std::sync::Arc<dyn bianchi_core::geometry::EigenFunction> =
        std::sync::Arc::new(bianchi_core::geometry::PinchingFn::new(a, c));
    let stream = SeedStream::new(seed).child("convexity");
    let rep = py
        .detach(|| convexity::cross_validate(&f, samples, rotations, &stream))
        .map_err(to_py_err)?;
    value_to_py(py, &serde_json::to_value(rep).expect("serializable"))
}

/// Run a CLI command from a JSON configuration string; returns `(exit_code, report)`.
#[pyfunction]
fn run_command<'py>(py: Python<'py>, config_json: &str) -> PyResult<(i32, Bound<'py, PyAny>)> {
    let cfg: RunConfig = serde_json::from_str(config_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let report = py.detach(|| commands::run_command(&cfg)).map_err(to_py_err)?;
    let v = serde_json::to_value(&report).expect("serializable");
    Ok((report.status.exit_code(), value_to_py(py, &v)?))
}

#[pymodule]
fn bianchi_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCurvature>()?;
    m.add_function(wrap_pyfunction!(b_formula, m)?)?;
    m.add_function(wrap_pyfunction!(eigen_ode_rhs, m)?)?;
    m.add_function(wrap_pyfunction!(bianchi_tuple_dimension, m)?)?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(nonconvexity_witness, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    m.add_function(wrap_pyfunction!(run_command, m)?)?;
    Ok(())
}
