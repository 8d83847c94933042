//! Python bindings: meshes, marking, adaptive runs and their histories.

use std::collections::HashMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use goafem::bench::BenchmarkName;
use goafem::cli::write_csv_file;
use goafem::driver::{rate_estimate, run_benchmark, AdaptiveConfig, Termination, Window, XField, YField};
use goafem::estimator::Indicators;
use goafem::marking::{self, MarkingConfig, MarkingStrategy};
use goafem::mesh::check_conformity;
use goafem::solver::SolverKind;

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr>(s: &str) -> PyResult<T>
where
    T::Err: ToString,
{
    s.parse().map_err(value_err)
}

/// Conforming triangulation refined by newest-vertex bisection.
#[pyclass(name = "Mesh", module = "goafem", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMesh {
    inner: goafem::Mesh,
}

#[pymethods]
impl PyMesh {
    /// Initial mesh of a named benchmark ("square-goal" or "zshape").
    #[staticmethod]
    fn benchmark(name: &str) -> PyResult<Self> {
        let name: BenchmarkName = parse(name)?;
        Ok(Self {
            inner: name.build().mesh,
        })
    }

    #[getter]
    fn num_elements(&self) -> usize {
        self.inner.num_elements()
    }

    #[getter]
    fn num_vertices(&self) -> usize {
        self.inner.num_vertices()
    }

    fn points(&self) -> Vec<(f64, f64)> {
        self.inner.points().iter().map(|p| (p.x, p.y)).collect()
    }

    /// Vertex triples; the first two span the refinement edge.
    fn triangles(&self) -> Vec<[usize; 3]> {
        self.inner.triangles().iter().map(|t| t.vertices).collect()
    }

    fn areas(&self) -> Vec<f64> {
        (0..self.inner.num_elements()).map(|t| self.inner.area(t)).collect()
    }

    fn refine(&self, marked: Vec<usize>) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.refine(&marked).map_err(value_err)?,
        })
    }

    fn refine_uniform(&self) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.refine_uniform().map_err(value_err)?,
        })
    }

    fn is_conforming(&self) -> bool {
        check_conformity(&self.inner).is_conforming()
    }

    fn __repr__(&self) -> String {
        format!(
            "Mesh(num_elements={}, num_vertices={})",
            self.inner.num_elements(),
            self.inner.num_vertices()
        )
    }
}

/// Step-by-step record of one adaptive run.
#[pyclass(name = "History", module = "goafem", frozen)]
struct PyHistory {
    inner: goafem::History,
}

#[pymethods]
impl PyHistory {
    fn __len__(&self) -> usize {
        self.inner.records.len()
    }

    #[getter]
    fn num_levels(&self) -> usize {
        self.inner.levels.len()
    }

    #[getter]
    fn reference(&self) -> Option<f64> {
        self.inner.reference
    }

    #[getter]
    fn lambda_initial(&self) -> Option<f64> {
        self.inner.lambda_initial
    }

    #[getter]
    fn termination(&self) -> &'static str {
        match self.inner.termination {
            Termination::ZeroEstimator => "zero-estimator",
            Termination::ElementBudget => "element-budget",
            Termination::WorkBudget => "work-budget",
        }
    }

    #[getter]
    fn final_mesh(&self) -> PyMesh {
        PyMesh {
            inner: self.inner.final_mesh.clone(),
        }
    }

    /// Per-step columns keyed by name. Missing diagnostics are `None`.
    fn columns(&self, py: Python<'_>) -> PyResult<HashMap<&'static str, Py<PyAny>>> {
        let r = &self.inner.records;
        let mut out = HashMap::new();
        macro_rules! col {
            ($name:literal, $f:expr) => {
                out.insert($name, r.iter().map($f).collect::<Vec<_>>().into_pyobject(py)?.into_any().unbind());
            };
        }
        col!("ell", |s| s.ell);
        col!("k", |s| s.k);
        col!("m", |s| s.m);
        col!("n", |s| s.n);
        col!("num_elements", |s| s.num_elements);
        col!("num_dofs", |s| s.num_dofs);
        col!("work", |s| s.work);
        col!("eta", |s| s.eta);
        col!("zeta", |s| s.zeta);
        col!("du_energy", |s| s.du_energy);
        col!("dz_energy", |s| s.dz_energy);
        col!("xi", |s| s.xi);
        col!("goal_discrete", |s| s.goal_discrete);
        col!("corrector", |s| s.corrector);
        col!("goal_error", |s| s.goal_error);
        col!("lambda_diag", |s| s.lambda_diag);
        Ok(out)
    }

    /// Empirical log-log slope. `x`: "elements" | "work"; `y`: "xi" |
    /// "eta-zeta" | "goal-error"; `last` restricts to the final points,
    /// otherwise the trailing decade is used.
    #[pyo3(signature = (x, y, last=None))]
    fn rate(&self, x: &str, y: &str, last: Option<usize>) -> PyResult<f64> {
        let x: XField = parse(x)?;
        let y = match y {
            "xi" => YField::Xi,
            "eta-zeta" => YField::EtaZeta,
            "goal-error" => YField::GoalError,
            other => return Err(PyValueError::new_err(format!("unknown y field '{other}'"))),
        };
        let window = last.map_or(Window::TrailingDecade, Window::Last);
        rate_estimate(&self.inner, x, y, window).map_err(value_err)
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        write_csv_file(&self.inner, &path).map_err(|e| PyIOError::new_err(e.to_string()))
    }
}

/// Runs the adaptive algorithm on a named benchmark.
#[pyfunction]
#[pyo3(signature = (
    problem, strategy="a", vartheta=0.5, lambda_ctr=1e-5, solver="ml-pcg",
    stopping="independent", max_elements=Some(10_000), max_work=None, diagnostics=false,
))]
#[allow(clippy::too_many_arguments)]
fn run(
    py: Python<'_>,
    problem: &str,
    strategy: &str,
    vartheta: f64,
    lambda_ctr: f64,
    solver: &str,
    stopping: &str,
    max_elements: Option<usize>,
    max_work: Option<u64>,
    diagnostics: bool,
) -> PyResult<PyHistory> {
    let bench = parse::<BenchmarkName>(problem)?.build();
    let strategy: MarkingStrategy = parse(strategy)?;
    let config = AdaptiveConfig {
        marking: MarkingConfig::new(strategy, vartheta).map_err(value_err)?,
        lambda_ctr,
        solver: parse::<SolverKind>(solver)?,
        stopping: parse(stopping)?,
        max_elements,
        max_work,
        diagnostics,
        ..AdaptiveConfig::default()
    };
    let inner = py.detach(|| run_benchmark(&bench, &config)).map_err(value_err)?;
    Ok(PyHistory { inner })
}

/// Marked element indices for the given indicator vectors.
#[pyfunction]
#[pyo3(signature = (eta, zeta, strategy="a", vartheta=0.5))]
fn mark(eta: Vec<f64>, zeta: Vec<f64>, strategy: &str, vartheta: f64) -> PyResult<Vec<usize>> {
    let config = MarkingConfig::new(parse(strategy)?, vartheta).map_err(value_err)?;
    let eta = Indicators::new(eta).map_err(value_err)?;
    let zeta = Indicators::new(zeta).map_err(value_err)?;
    marking::mark(&eta, &zeta, &config).map_err(value_err)
}

/// Smallest index set holding `fraction` of the total of `values`.
#[pyfunction]
fn doerfler_min_set(values: Vec<f64>, fraction: f64) -> PyResult<Vec<usize>> {
    marking::doerfler_min_set(&values, fraction).map_err(value_err)
}

#[pymodule(name = "goafem")]
fn goafem_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_class::<PyHistory>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(mark, m)?)?;
    m.add_function(wrap_pyfunction!(doerfler_min_set, m)?)?;
    Ok(())
}
