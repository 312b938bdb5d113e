//! Python bindings for the `qframes` library, importable as `qframes_py`.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use qframes::frames::{self, DensityMatrix};
use qframes::scenarios::{render, run_scenario, ScenarioConfig};
use qframes::schmidt::{self, Bipartition, DEFAULT_TRUNC_TOL};
use qframes::{Error, GaussianParams, Grid, StateVector};

/// Errors caused by bad arguments become `ValueError`, the rest `RuntimeError`.
fn to_py(e: Error) -> PyErr {
    if is_argument_error(&e) {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn is_argument_error(e: &Error) -> bool {
    !matches!(
        e,
        Error::CflViolation { .. }
            | Error::InteractionNotNegligible { .. }
            | Error::VanishingOverlap(_)
            | Error::EmptyDecomposition
    )
}

#[pyclass(name = "Grid", module = "qframes_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyGrid(Grid);

#[pymethods]
impl PyGrid {
    #[new]
    fn new(n_points: usize, x_min: f64, x_max: f64) -> PyResult<Self> {
        Grid::new(n_points, x_min, x_max).map(Self).map_err(to_py)
    }

    #[getter]
    fn n_points(&self) -> usize {
        self.0.n_points()
    }

    #[getter]
    fn dx(&self) -> f64 {
        self.0.dx()
    }

    fn points(&self) -> Vec<f64> {
        self.0.points()
    }

    fn __repr__(&self) -> String {
        format!("Grid({}, {}, {})", self.0.n_points(), self.0.x_min(), self.0.x_max())
    }
}

#[pyclass(name = "State", module = "qframes_py", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyState(StateVector);

#[pymethods]
impl PyState {
    /// Gaussian wavepacket with amplitude dispersion `sigma`.
    #[staticmethod]
    #[pyo3(signature = (label, grid, center, momentum, sigma, mass, hbar = 1.0))]
    fn gaussian(
        label: &str,
        grid: &PyGrid,
        center: f64,
        momentum: f64,
        sigma: f64,
        mass: f64,
        hbar: f64,
    ) -> PyResult<Self> {
        let p = GaussianParams::new(center, momentum, sigma, mass, hbar).map_err(to_py)?;
        qframes::make_gaussian(label, &grid.0, &p).map(Self).map_err(to_py)
    }

    /// Normalised state of a level factor.
    #[staticmethod]
    fn level(label: &str, amplitudes: Vec<Complex64>) -> PyResult<Self> {
        StateVector::level(label, amplitudes).map(Self).map_err(to_py)
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.0.space().labels().into_iter().map(String::from).collect()
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.0.space().dims()
    }

    fn amplitudes(&self) -> Vec<Complex64> {
        self.0.amplitudes().to_vec()
    }

    fn norm(&self) -> f64 {
        self.0.norm()
    }

    fn __repr__(&self) -> String {
        format!("State({})", self.0.space())
    }
}

#[pyclass(name = "DensityMatrix", module = "qframes_py", frozen)]
pub struct PyDensityMatrix(DensityMatrix);

#[pymethods]
impl PyDensityMatrix {
    #[getter]
    fn labels(&self) -> Vec<String> {
        self.0.labels().into_iter().map(String::from).collect()
    }

    fn matrix(&self) -> Vec<Vec<Complex64>> {
        let m = self.0.matrix();
        (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
    }

    fn trace(&self) -> f64 {
        self.0.trace()
    }

    fn purity(&self) -> f64 {
        self.0.purity()
    }

    fn eigenvalues(&self) -> Vec<f64> {
        self.0.eigenvalues()
    }
}

/// Result of a Schmidt decomposition.
#[pyclass(name = "Schmidt", module = "qframes_py", frozen, get_all)]
pub struct PySchmidt {
    coefficients: Vec<f64>,
    probabilities: Vec<f64>,
    truncation_residual: f64,
    degenerate: bool,
    entropy: f64,
    left_states: Vec<PyState>,
    right_states: Vec<PyState>,
}

#[pyfunction]
fn tensor_product(states: Vec<PyState>) -> PyResult<PyState> {
    let refs: Vec<&StateVector> = states.iter().map(|s| &s.0).collect();
    qframes::tensor_product(&refs).map(PyState).map_err(to_py)
}

#[pyfunction]
fn inner_product(a: &PyState, b: &PyState) -> PyResult<Complex64> {
    qframes::inner_product(&a.0, &b.0).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (psi, left, right, trunc_tol = DEFAULT_TRUNC_TOL))]
fn schmidt_decompose(psi: &PyState, left: Vec<String>, right: Vec<String>, trunc_tol: f64) -> PyResult<PySchmidt> {
    let r = schmidt::schmidt_decompose(&psi.0, &Bipartition::new(left, right), trunc_tol).map_err(to_py)?;
    Ok(PySchmidt {
        probabilities: r.probabilities(),
        truncation_residual: r.truncation_residual,
        degenerate: r.is_degenerate(),
        entropy: schmidt::entanglement_entropy(&r),
        left_states: r.left_states.iter().cloned().map(PyState).collect(),
        right_states: r.right_states.iter().cloned().map(PyState).collect(),
        coefficients: r.coefficients,
    })
}

#[pyfunction]
fn reduced_density_matrix(psi: &PyState, keep: Vec<String>) -> PyResult<PyDensityMatrix> {
    let keep: Vec<&str> = keep.iter().map(String::as_str).collect();
    frames::reduced_density_matrix(&psi.0, &keep).map(PyDensityMatrix).map_err(to_py)
}

/// Branch mixture of `psi` across `(left | right)`, reduced to `keep`.
#[pyfunction]
fn mixed_density_matrix(psi: &PyState, left: Vec<String>, right: Vec<String>, keep: Vec<String>) -> PyResult<PyDensityMatrix> {
    let ens = frames::branch_ensemble(&psi.0, &Bipartition::new(left, right)).map_err(to_py)?;
    let keep: Vec<&str> = keep.iter().map(String::as_str).collect();
    frames::mixed_density_matrix(&ens, &keep).map(PyDensityMatrix).map_err(to_py)
}

#[pyfunction]
fn trace_distance(a: &PyDensityMatrix, b: &PyDensityMatrix) -> PyResult<f64> {
    frames::trace_distance(&a.0, &b.0).map_err(to_py)
}

/// Runs a scenario from config text and returns its JSON-lines report.
#[pyfunction]
fn run_config(py: Python<'_>, config: &str) -> PyResult<String> {
    let hash = ScenarioConfig::canonical_hash(config).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let cfg = ScenarioConfig::from_toml(config).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let run = py.detach(|| run_scenario(&cfg)).map_err(to_py)?;
    Ok(render(&cfg, &run, &hash).report)
}

#[pymodule]
pub fn qframes_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyState>()?;
    m.add_class::<PyDensityMatrix>()?;
    m.add_class::<PySchmidt>()?;
    m.add_function(wrap_pyfunction!(tensor_product, m)?)?;
    m.add_function(wrap_pyfunction!(inner_product, m)?)?;
    m.add_function(wrap_pyfunction!(schmidt_decompose, m)?)?;
    m.add_function(wrap_pyfunction!(reduced_density_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(mixed_density_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(trace_distance, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
