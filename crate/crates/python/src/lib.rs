//! Python bindings: matrices are passed as lists of rows.

use pivotal_core as core;
use pivotal_core::{DenseMatrix, Error, RngState};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::SolverDiverged(_) | Error::QuadratureFailure(_) | Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DenseMatrix> {
    DenseMatrix::from_rows(&rows).map_err(to_py)
}

fn rows_of(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn rng(seed: u64, stream: u64) -> RngState {
    RngState::new(seed).with_stream(stream)
}

/// Inclusion probabilities `min(1, c·τ)` summing to `k`.
#[pyclass(name = "InclusionProbabilities", module = "pivotal", skip_from_py_object)]
#[derive(Clone)]
struct PyProbabilities(core::InclusionProbabilities);

#[pymethods]
impl PyProbabilities {
    #[new]
    fn new(probs: Vec<f64>) -> PyResult<Self> {
        core::InclusionProbabilities::new(probs).map(Self).map_err(to_py)
    }

    #[getter]
    fn probs(&self) -> Vec<f64> {
        self.0.probs.clone()
    }

    #[getter]
    fn k(&self) -> usize {
        self.0.k
    }

    fn certain(&self) -> Vec<usize> {
        self.0.certain().collect()
    }

    fn uncertain(&self) -> Vec<usize> {
        self.0.uncertain().collect()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("InclusionProbabilities(n={}, k={})", self.0.len(), self.0.k)
    }
}

/// Binary competition tree over row indices.
#[pyclass(name = "CompetitionTree", module = "pivotal", skip_from_py_object)]
#[derive(Clone)]
struct PyTree(core::CompetitionTree);

#[pymethods]
impl PyTree {
    /// Recursive median splits of `x` (`"pca"` or `"coordinate"`).
    #[staticmethod]
    #[pyo3(signature = (x, probs, method = "pca"))]
    fn build(x: Vec<Vec<f64>>, probs: &PyProbabilities, method: &str) -> PyResult<Self> {
        let m = match method {
            "pca" => core::SplitMethod::Pca,
            "coordinate" => core::SplitMethod::Coordinate,
            other => return Err(PyValueError::new_err(format!("unknown split method {other:?}"))),
        };
        core::build_tree(&matrix(x)?, &probs.0, m).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn balanced(order: Vec<usize>) -> PyResult<Self> {
        core::CompetitionTree::from_order(&order).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn random(leaves: Vec<usize>, seed: u64) -> PyResult<Self> {
        core::CompetitionTree::random(&leaves, &mut RngState::new(seed).generator())
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        core::CompetitionTree::from_json(&v).map(Self).map_err(to_py)
    }

    fn to_json(&self) -> String {
        self.0.to_json().to_string()
    }

    fn leaves(&self) -> Vec<usize> {
        self.0.leaves().to_vec()
    }

    fn depth(&self) -> usize {
        self.0.depth()
    }

    fn __len__(&self) -> usize {
        self.0.leaf_count()
    }
}

/// Selected rows with their `1/√p̃` weights.
#[pyclass(name = "SampleSet", module = "pivotal", skip_from_py_object)]
#[derive(Clone)]
struct PySample(core::SampleSet);

#[pymethods]
impl PySample {
    #[getter]
    fn indices(&self) -> Vec<usize> {
        self.0.indices.clone()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights.clone()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __contains__(&self, i: usize) -> bool {
        self.0.contains(i)
    }
}

#[pyfunction]
fn leverage_scores(a: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    core::leverage_scores(&matrix(a)?).map(|l| l.scores).map_err(to_py)
}

#[pyfunction]
fn probability_ceiling(initial: Vec<f64>, k: usize) -> PyResult<PyProbabilities> {
    core::probability_ceiling(&initial, k).map(PyProbabilities).map_err(to_py)
}

/// Leverage scores of `a` turned into inclusion probabilities for `k` rows.
#[pyfunction]
fn leverage_probabilities(a: Vec<Vec<f64>>, k: usize) -> PyResult<PyProbabilities> {
    let lev = core::leverage_scores(&matrix(a)?).map_err(to_py)?;
    core::InclusionProbabilities::from_leverage(&lev, k)
        .map(PyProbabilities)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (tree, probs, seed, stream = 0))]
fn pivotal_sample(tree: &PyTree, probs: &PyProbabilities, seed: u64, stream: u64) -> PyResult<PySample> {
    core::pivotal_sample(&tree.0, &probs.0, &rng(seed, stream))
        .map(PySample)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (probs, seed, stream = 0))]
fn bernoulli_sample(probs: &PyProbabilities, seed: u64, stream: u64) -> PySample {
    PySample(core::bernoulli_sample(&probs.0, &rng(seed, stream)))
}

#[pyfunction]
#[pyo3(signature = (n, k, seed, stream = 0))]
fn uniform_sample(n: usize, k: usize, seed: u64, stream: u64) -> PyResult<PySample> {
    core::uniform_sample(n, k, &rng(seed, stream)).map(PySample).map_err(to_py)
}

/// Coefficients of the reweighted least-squares fit on the sampled rows.
#[pyfunction]
fn fit_sample(a: Vec<Vec<f64>>, b: Vec<f64>, sample: &PySample) -> PyResult<Vec<f64>> {
    let (sub_a, sub_b) = core::subsample_system(&matrix(a)?, &b, &sample.0).map_err(to_py)?;
    core::weighted_least_squares(&sub_a, &sub_b)
        .map(|s| s.coefficients)
        .map_err(to_py)
}

#[pyfunction]
fn orthonormal_basis(a: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    core::orthonormal_basis(&matrix(a)?).map(|u| rows_of(&u)).map_err(to_py)
}

/// Exact outcome table `[(indices, probability)]` of pivotal sampling.
#[pyfunction]
fn enumerate_pivotal(tree: &PyTree, probs: &PyProbabilities) -> PyResult<Vec<(Vec<usize>, f64)>> {
    core::enumerate_pivotal(&tree.0, &probs.0)
        .map(|d| d.outcomes)
        .map_err(to_py)
}

/// Largest one-sided influence norm of the pivotal law over conditioning
/// sets of size at most `max_conditioning`.
#[pyfunction]
#[pyo3(signature = (tree, probs, max_conditioning = 3))]
fn d_inf(tree: &PyTree, probs: &PyProbabilities, max_conditioning: usize) -> PyResult<f64> {
    let dist = core::enumerate_pivotal(&tree.0, &probs.0).map_err(to_py)?;
    core::d_inf(&dist, max_conditioning).map_err(to_py)
}

#[pyfunction]
fn embedding_deviation(u: Vec<Vec<f64>>, sample: &PySample) -> PyResult<f64> {
    core::embedding_deviation(&matrix(u)?, &sample.0).map_err(to_py)
}

/// One point per equal-mass cell of the degree-`degree` leverage density.
#[pyfunction]
#[pyo3(signature = (degree, k, seed, lo = -1.0, hi = 1.0))]
fn continuum_sample(degree: usize, k: usize, seed: u64, lo: f64, hi: f64) -> PyResult<Vec<f64>> {
    let density = core::LeverageDensity::new(degree, (lo, hi)).map_err(to_py)?;
    let partition = core::build_partition(&density, k).map_err(to_py)?;
    Ok(core::sample_continuum(&density, &partition, &RngState::new(seed)))
}

/// Quantity of interest of a named test problem at one parameter point.
#[pyfunction]
fn evaluate_target(problem: &str, point: Vec<f64>) -> PyResult<f64> {
    let p: core::TargetProblem = problem.parse().map_err(to_py)?;
    core::evaluate_target(&p, &point).map_err(to_py)
}

/// Runs a sweep from a JSON config; returns `(opt_error, [(sampler, k, median_error)])`.
#[pyfunction]
fn run_experiment(py: Python<'_>, config_json: &str) -> PyResult<(f64, Vec<(String, usize, f64)>)> {
    let cfg: core::ExperimentConfig =
        serde_json::from_str(config_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let result = py.detach(|| core::run_experiment(&cfg)).map_err(to_py)?;
    let rows = result
        .summary
        .iter()
        .map(|r| (r.sampler.name().to_string(), r.k, r.median_error))
        .collect();
    Ok((result.opt_error, rows))
}

#[pymodule]
fn pivotal(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProbabilities>()?;
    m.add_class::<PyTree>()?;
    m.add_class::<PySample>()?;
    m.add_function(wrap_pyfunction!(leverage_scores, m)?)?;
    m.add_function(wrap_pyfunction!(probability_ceiling, m)?)?;
    m.add_function(wrap_pyfunction!(leverage_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(pivotal_sample, m)?)?;
    m.add_function(wrap_pyfunction!(bernoulli_sample, m)?)?;
    m.add_function(wrap_pyfunction!(uniform_sample, m)?)?;
    m.add_function(wrap_pyfunction!(fit_sample, m)?)?;
    m.add_function(wrap_pyfunction!(orthonormal_basis, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_pivotal, m)?)?;
    m.add_function(wrap_pyfunction!(d_inf, m)?)?;
    m.add_function(wrap_pyfunction!(embedding_deviation, m)?)?;
    m.add_function(wrap_pyfunction!(continuum_sample, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_target, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
