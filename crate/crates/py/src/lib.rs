//! Python bindings. Matrices cross the boundary as lists of row lists.

use lqdg_core::gen::{self, BallSpec, GenSpec};
use lqdg_core::linalg::{from_rows, to_rows};
use lqdg_core::{self as core, Algorithm, LqdgError, SolverConfig};
use nalgebra::DMatrix;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

type Rows = Vec<Vec<f64>>;

fn err(e: LqdgError) -> PyErr {
    match e {
        LqdgError::Unstable { .. } | LqdgError::Numerical(_) | LqdgError::SamplingFailed { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn mat(rows: &Rows) -> PyResult<DMatrix<f64>> {
    from_rows(rows).map_err(err)
}

fn mats(list: &[Rows]) -> PyResult<Vec<DMatrix<f64>>> {
    list.iter().map(mat).collect()
}

/// A dynamic game `x' = A x + Σ B^i u^i` with quadratic costs.
#[pyclass(name = "GameInstance", module = "lqdg", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyGameInstance {
    inner: core::GameInstance,
}

#[pymethods]
impl PyGameInstance {
    #[new]
    #[pyo3(signature = (a, b, q, r, x0 = None))]
    fn new(a: Rows, b: Vec<Rows>, q: Vec<Rows>, r: Vec<Rows>, x0: Option<Rows>) -> PyResult<Self> {
        let x0 = x0.as_ref().map(mat).transpose()?;
        let inner = core::GameInstance::new(mat(&a)?, mats(&b)?, mats(&q)?, mats(&r)?, x0).map_err(err)?;
        Ok(Self { inner })
    }

    /// The two-player benchmark game.
    #[staticmethod]
    fn paper() -> Self {
        Self { inner: gen::paper_instance() }
    }

    #[staticmethod]
    #[pyo3(signature = (n, players, m, seed, target_radius = 0.8, cost_shift = 1.0))]
    fn random(n: usize, players: usize, m: usize, seed: u64, target_radius: f64, cost_shift: f64) -> PyResult<Self> {
        let spec = GenSpec { target_radius, cost_shift, ..GenSpec::uniform(n, players, m, seed) };
        Ok(Self { inner: gen::random_instance(&spec).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        Ok(Self { inner: core::GameInstance::from_json(s).map_err(err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn players(&self) -> usize {
        self.inner.players()
    }

    #[getter]
    fn m(&self) -> Vec<usize> {
        self.inner.m()
    }

    #[getter]
    fn a(&self) -> Rows {
        to_rows(self.inner.a())
    }

    fn b(&self, i: usize) -> PyResult<Rows> {
        self.check_player(i)?;
        Ok(to_rows(self.inner.b(i)))
    }

    fn q(&self, i: usize) -> PyResult<Rows> {
        self.check_player(i)?;
        Ok(to_rows(self.inner.q(i)))
    }

    fn r(&self, i: usize) -> PyResult<Rows> {
        self.check_player(i)?;
        Ok(to_rows(self.inner.r(i)))
    }

    fn zero_policy(&self) -> PyPolicySet {
        PyPolicySet { inner: gen::zero_policy(&self.inner) }
    }

    fn __repr__(&self) -> String {
        format!("GameInstance(n={}, players={}, m={:?})", self.inner.n(), self.inner.players(), self.inner.m())
    }
}

impl PyGameInstance {
    fn check_player(&self, i: usize) -> PyResult<()> {
        if i < self.inner.players() {
            Ok(())
        } else {
            Err(PyValueError::new_err(format!("player index {i} out of range")))
        }
    }
}

/// One linear feedback gain `K^i` per player, `u^i = K^i x`.
#[pyclass(name = "PolicySet", module = "lqdg", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyPolicySet {
    inner: core::PolicySet,
}

#[pymethods]
impl PyPolicySet {
    #[new]
    fn new(gains: Vec<Rows>) -> PyResult<Self> {
        Ok(Self { inner: core::PolicySet::new(mats(&gains)?).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        Ok(Self { inner: core::PolicySet::from_json(s).map_err(err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    #[getter]
    fn gains(&self) -> Vec<Rows> {
        self.inner.gains().iter().map(to_rows).collect()
    }

    fn flat(&self) -> Vec<f64> {
        self.inner.flat_entries()
    }

    fn __len__(&self) -> usize {
        self.inner.players()
    }

    fn __repr__(&self) -> String {
        format!("PolicySet({:?})", self.gains())
    }
}

/// Outcome of one solver run.
#[pyclass(name = "SolveResult", module = "lqdg", frozen)]
pub struct PySolveResult {
    inner: core::SolveResult,
}

#[pymethods]
impl PySolveResult {
    #[getter]
    fn status(&self) -> String {
        self.inner.status.to_string()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn policies(&self) -> PyPolicySet {
        PyPolicySet { inner: self.inner.final_policies.clone() }
    }

    #[getter]
    fn values(&self) -> Option<Vec<Rows>> {
        self.inner.final_values.as_ref().map(|v| v.values().iter().map(to_rows).collect())
    }

    #[getter]
    fn e_norm(&self) -> Option<f64> {
        self.inner.final_e_norm()
    }

    #[getter]
    fn message(&self) -> Option<String> {
        self.inner.message.clone()
    }

    /// Per-iteration records as dicts with keys k, policy_delta, e_norm, rho, elapsed_ns.
    fn trace<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner
            .trace
            .iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("k", r.k)?;
                d.set_item("policy_delta", r.policy_delta)?;
                d.set_item("e_norm", r.e_norm)?;
                d.set_item("rho", r.closed_loop_radius)?;
                d.set_item("elapsed_ns", r.elapsed_ns)?;
                Ok(d)
            })
            .collect()
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("SolveResult(status={}, iterations={})", self.inner.status, self.inner.iterations)
    }
}

/// Runs `algorithm` (VI, PI, VPG, NPG or GNPG). `k0` defaults to the zero
/// policy; `reference` enables normalized-error tracking.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (game, algorithm, k0 = None, eta = None, epsilon = None, max_iterations = None, reference = None))]
fn solve(
    py: Python<'_>,
    game: &PyGameInstance,
    algorithm: &str,
    k0: Option<&PyPolicySet>,
    eta: Option<f64>,
    epsilon: Option<f64>,
    max_iterations: Option<usize>,
    reference: Option<&PyPolicySet>,
) -> PyResult<PySolveResult> {
    let alg: Algorithm = algorithm.parse().map_err(err)?;
    let inst = &game.inner;
    let mut cfg = SolverConfig::new(alg, inst.players());
    if let Some(e) = eta {
        cfg = cfg.with_eta(e);
    }
    if let Some(e) = epsilon {
        cfg = cfg.with_epsilon(e);
    }
    if let Some(m) = max_iterations {
        cfg = cfg.with_max_iterations(m);
    }
    let k0 = k0.map_or_else(|| gen::zero_policy(inst), |k| k.inner.clone());
    let reference = reference.map(|r| r.inner.clone());
    let res = py
        .detach(|| core::run_solver(inst, Some(&k0), &cfg, reference.as_ref()))
        .map_err(err)?;
    Ok(PySolveResult { inner: res })
}

/// Value matrices `P^i` of a stabilizing joint policy.
#[pyfunction]
fn evaluate_policies(game: &PyGameInstance, policy: &PyPolicySet) -> PyResult<Vec<Rows>> {
    let v = core::evaluate_policies(&game.inner, &policy.inner).map_err(err)?;
    Ok(v.values().iter().map(to_rows).collect())
}

#[pyfunction]
fn cost(game: &PyGameInstance, policy: &PyPolicySet) -> PyResult<Vec<f64>> {
    core::cost(&game.inner, &policy.inner).map_err(err)
}

#[pyfunction]
fn gradient(game: &PyGameInstance, policy: &PyPolicySet, player: usize) -> PyResult<Rows> {
    Ok(to_rows(&core::gradient(&game.inner, &policy.inner, player).map_err(err)?))
}

#[pyfunction]
fn closed_loop_spectral_radius(game: &PyGameInstance, policy: &PyPolicySet) -> PyResult<f64> {
    let acl = core::closed_loop_matrix(&game.inner, &policy.inner).map_err(err)?;
    core::spectral_radius(&acl).map_err(err)
}

#[pyfunction]
fn normalized_error(policy: &PyPolicySet, reference: &PyPolicySet) -> PyResult<f64> {
    core::normalized_error(&policy.inner, &reference.inner).map_err(err)
}

/// Stability and per-player PBH results as a dict.
#[pyfunction]
fn check_equilibrium_conditions<'py>(
    py: Python<'py>,
    game: &PyGameInstance,
    policy: &PyPolicySet,
) -> PyResult<Bound<'py, PyDict>> {
    let rep = core::check_equilibrium_conditions(&game.inner, &policy.inner).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("closed_loop_spectral_radius", rep.closed_loop_spectral_radius)?;
    d.set_item("is_stable", rep.is_stable)?;
    d.set_item("per_player_stabilizable", rep.per_player_stabilizable)?;
    d.set_item("per_player_detectable", rep.per_player_detectable)?;
    Ok(d)
}

/// Stabilizing policy with every `‖K^i − reference^i‖_F ≤ radius`.
#[pyfunction]
#[pyo3(signature = (game, reference, radius, seed, max_rejections = 10_000))]
fn sample_policy_in_ball(
    game: &PyGameInstance,
    reference: &PyPolicySet,
    radius: f64,
    seed: u64,
    max_rejections: usize,
) -> PyResult<PyPolicySet> {
    let spec = BallSpec { max_rejections, ..BallSpec::new(reference.inner.clone(), radius, seed) };
    Ok(PyPolicySet { inner: gen::sample_policy_in_ball(&game.inner, &spec).map_err(err)? })
}

#[pymodule]
fn lqdg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGameInstance>()?;
    m.add_class::<PyPolicySet>()?;
    m.add_class::<PySolveResult>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_policies, m)?)?;
    m.add_function(wrap_pyfunction!(cost, m)?)?;
    m.add_function(wrap_pyfunction!(gradient, m)?)?;
    m.add_function(wrap_pyfunction!(closed_loop_spectral_radius, m)?)?;
    m.add_function(wrap_pyfunction!(normalized_error, m)?)?;
    m.add_function(wrap_pyfunction!(check_equilibrium_conditions, m)?)?;
    m.add_function(wrap_pyfunction!(sample_policy_in_ball, m)?)?;
    m.add("ALGORITHMS", Algorithm::ALL.iter().map(|a| a.label()).collect::<Vec<_>>())?;
    m.add("PAPER_K0_NEAR", PyPolicySet { inner: gen::paper_k0_near() }.into_pyobject(m.py())?)?;
    m.add("PAPER_K0_FAR", PyPolicySet { inner: gen::paper_k0_far() }.into_pyobject(m.py())?)?;
    Ok(())
}
