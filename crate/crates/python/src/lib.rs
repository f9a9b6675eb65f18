//! Python bindings for the `macroq` crate.
//!
//! Structured results (metrics rows, slot records, oracle solutions,
//! manifests) cross the boundary as plain dicts and lists.

use std::path::PathBuf;

use macroq::action::{ActionSet as CoreActionSet, MacroDef};
use macroq::analysis::{self, ExplicitModel};
use macroq::envs::{AnyEnv, EnvSpec, Environment, Observation, TabularModel};
use macroq::experiment::{self, ExperimentConfig};
use macroq::macros;
use macroq::qlearn;
use macroq::trace::EpisodeTrace;
use macroq::Error;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        Error::NonFinite(_) | Error::NotConverged { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Serializable value -> Python object via the standard `json` module.
fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_py<T: serde::de::DeserializeOwned>(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = py.import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn defs(sequences: Vec<Vec<usize>>) -> Vec<MacroDef> {
    sequences.into_iter().map(MacroDef::new).collect()
}

fn sequences(defs: Vec<MacroDef>) -> Vec<Vec<usize>> {
    defs.into_iter().map(|m| m.sequence).collect()
}

/// A bundled environment built from a spec dict such as
/// `{"kind": "chain", "n": 10}`.
#[pyclass(name = "Env", module = "pymacroq")]
struct PyEnv {
    inner: AnyEnv,
}

fn obs_tuple(o: Observation) -> (usize, Vec<f64>) {
    (o.state, o.features)
}

#[pymethods]
impl PyEnv {
    #[new]
    fn new(py: Python<'_>, spec: &Bound<'_, PyAny>) -> PyResult<Self> {
        let spec: EnvSpec = from_py(py, spec)?;
        Ok(Self {
            inner: spec.build().map_err(to_py_err)?,
        })
    }

    #[getter]
    fn action_count(&self) -> usize {
        self.inner.action_count()
    }

    #[getter]
    fn action_labels(&self) -> Vec<String> {
        self.inner.action_labels()
    }

    #[getter]
    fn state_count(&self) -> usize {
        self.inner.state_count()
    }

    #[getter]
    fn max_episode_steps(&self) -> usize {
        self.inner.max_episode_steps()
    }

    #[getter]
    fn optimal_return(&self) -> Option<f64> {
        self.inner.optimal_return()
    }

    /// Returns `(state, features)`.
    #[pyo3(signature = (seed=0))]
    fn reset(&mut self, seed: u64) -> (usize, Vec<f64>) {
        obs_tuple(self.inner.reset(seed))
    }

    /// Returns `(state, features, reward, terminal, truncated)`.
    fn step(&mut self, action: usize) -> PyResult<(usize, Vec<f64>, f64, bool, bool)> {
        let out = self.inner.step(action).map_err(to_py_err)?;
        let (state, features) = obs_tuple(out.observation);
        Ok((state, features, out.reward, out.terminal, out.truncated))
    }

    #[getter]
    fn done(&self) -> bool {
        self.inner.is_done()
    }

    /// Runs one output of `actions` from the current state; returns
    /// `(visited_states, discounted_reward, tau, terminal, truncated)`.
    fn execute(
        &mut self,
        actions: &PyActionSet,
        index: usize,
        gamma: f64,
    ) -> PyResult<(Vec<usize>, f64, usize, bool, bool)> {
        let ex = qlearn::execute_output(&mut self.inner, &actions.inner, index, gamma)
            .map_err(to_py_err)?;
        let visited = ex.visited.iter().map(|o| o.state).collect();
        Ok((visited, ex.reward_cum, ex.tau, ex.terminal, ex.truncated))
    }

    /// Exact optimal values for enumerable environments. Macros installed in
    /// `actions` are solved as temporally extended options.
    #[pyo3(signature = (gamma, actions=None, tol=1e-10))]
    fn value_iteration(
        &self,
        py: Python<'_>,
        gamma: f64,
        actions: Option<&PyActionSet>,
        tol: f64,
    ) -> PyResult<Py<PyAny>> {
        let set = match actions {
            Some(a) => a.inner.clone(),
            None => CoreActionSet::with_capacity(&self.inner.action_labels(), 0).map_err(to_py_err)?,
        };
        let solution = match &self.inner {
            AnyEnv::Chain(e) => solve(e, &set, gamma, tol),
            AnyEnv::Gridworld(e) => solve(e, &set, gamma, tol),
            AnyEnv::Catch(_) => Err(Error::InvalidEnvironment(
                "catch has no enumerable model".into(),
            )),
        }
        .map_err(to_py_err)?;
        to_py(py, &solution)
    }

    fn __repr__(&self) -> String {
        format!(
            "Env(states={}, actions={:?})",
            self.inner.state_count(),
            self.inner.action_labels()
        )
    }
}

fn solve<M: TabularModel>(
    model: &M,
    set: &CoreActionSet,
    gamma: f64,
    tol: f64,
) -> macroq::Result<analysis::OracleSolution> {
    let explicit = ExplicitModel::build(model, set, gamma)?;
    if explicit.is_atomic_only() {
        analysis::value_iteration(&explicit, gamma, tol)
    } else {
        analysis::smdp_value_iteration(&explicit, gamma, tol)
    }
}

/// Atomic actions followed by a fixed number of macro slots.
#[pyclass(name = "ActionSet", module = "pymacroq")]
struct PyActionSet {
    inner: CoreActionSet,
}

#[pymethods]
impl PyActionSet {
    /// `capacity` defaults to the number of atomic actions.
    #[new]
    #[pyo3(signature = (labels, capacity=None))]
    fn new(labels: Vec<String>, capacity: Option<usize>) -> PyResult<Self> {
        let capacity = capacity.unwrap_or(labels.len());
        Ok(Self {
            inner: CoreActionSet::with_capacity(&labels, capacity).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn atomic_count(&self) -> usize {
        self.inner.atomic_count()
    }

    #[getter]
    fn capacity(&self) -> usize {
        self.inner.capacity()
    }

    #[getter]
    fn output_arity(&self) -> usize {
        self.inner.output_arity()
    }

    #[getter]
    fn version(&self) -> u64 {
        self.inner.version()
    }

    fn enabled_mask(&self) -> Vec<bool> {
        self.inner.enabled_mask()
    }

    fn expand(&self, index: usize) -> PyResult<Vec<usize>> {
        self.inner.expand_output_index(index).map_err(to_py_err)
    }

    fn label(&self, index: usize) -> String {
        self.inner.output_label(index)
    }

    /// Cuts at capacity, fills the rest with disabled empty slots.
    fn replace(&mut self, py: Python<'_>, macros: Vec<Vec<usize>>) -> PyResult<Py<PyAny>> {
        let record = macros::replace_macros(&mut self.inner, &defs(macros)).map_err(to_py_err)?;
        to_py(py, &record)
    }

    fn slot_records(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.slot_records())
    }

    fn __len__(&self) -> usize {
        self.inner.output_arity()
    }

    fn __repr__(&self) -> String {
        let labels: Vec<String> = (0..self.inner.output_arity())
            .map(|i| self.inner.output_label(i))
            .collect();
        format!("ActionSet({labels:?})")
    }
}

#[pyfunction]
fn lcs(x: Vec<i64>, y: Vec<i64>) -> usize {
    macros::lcs(&x, &y)
}

#[pyfunction]
fn repetition_macros(atomic_count: usize, length: usize) -> Vec<Vec<usize>> {
    sequences(macros::repetition_macros(atomic_count, length))
}

#[pyfunction]
#[pyo3(signature = (atomic_count, length, count, seed=0))]
fn random_macros(atomic_count: usize, length: usize, count: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sequences(macros::random_macros(atomic_count, length, count, &mut rng))
}

/// `episodes` is a list of per-episode action lists; windows never cross
/// episode boundaries.
#[pyfunction]
#[pyo3(signature = (episodes, length, capacity, omega=macros::DEFAULT_OMEGA))]
fn frequency_macros(
    episodes: Vec<Vec<usize>>,
    length: usize,
    capacity: usize,
    omega: f64,
) -> Vec<Vec<usize>> {
    let trace = EpisodeTrace::from_segments(episodes);
    sequences(macros::frequency_macros(&trace, length, capacity, omega))
}

#[pyfunction]
#[pyo3(signature = (reward_cum, tau, gamma, next_q, enabled, terminal=false))]
fn smdp_target(
    reward_cum: f64,
    tau: usize,
    gamma: f64,
    next_q: Vec<f64>,
    enabled: Vec<bool>,
    terminal: bool,
) -> PyResult<f64> {
    qlearn::smdp_target(reward_cum, tau, gamma, &next_q, &enabled, terminal).map_err(to_py_err)
}

#[pyfunction]
#[pyo3(signature = (q, enabled=None))]
fn action_gap(q: Vec<f64>, enabled: Option<Vec<bool>>) -> PyResult<f64> {
    let enabled = enabled.unwrap_or_else(|| vec![true; q.len()]);
    analysis::action_gap(&q, &enabled).map_err(to_py_err)
}

fn parse_config(text: &str) -> PyResult<ExperimentConfig> {
    let config = ExperimentConfig::from_toml_str(text).map_err(to_py_err)?;
    config.validate().map_err(to_py_err)?;
    Ok(config)
}

/// Runs one trial of a TOML experiment config in memory and returns its
/// metrics rows, macro events and final Q parameters.
#[pyfunction]
#[pyo3(signature = (config_toml, trial=0))]
fn run_trial(py: Python<'_>, config_toml: &str, trial: usize) -> PyResult<Py<PyAny>> {
    let config = parse_config(config_toml)?;
    let art = py
        .detach(|| experiment::run_trial(&config, trial))
        .map_err(to_py_err)?;
    #[derive(Serialize)]
    struct Out<'a> {
        trial: usize,
        seed: u64,
        env_steps: usize,
        metrics: &'a [analysis::MetricsRow],
        macro_events: &'a [qlearn::MacroEvent],
        q_params: &'a qlearn::QDump,
    }
    to_py(
        py,
        &Out {
            trial: art.trial,
            seed: art.seed,
            env_steps: art.env_steps,
            metrics: &art.metrics,
            macro_events: &art.macro_history,
            q_params: &art.dump,
        },
    )
}

/// Runs every trial of a config and writes the usual artifacts under
/// `output_dir`; returns the manifest.
#[pyfunction]
fn run_experiment(py: Python<'_>, config_toml: &str, output_dir: PathBuf) -> PyResult<Py<PyAny>> {
    let config = parse_config(config_toml)?;
    let summary = py
        .detach(|| experiment::run_experiment(&config, config_toml, &output_dir))
        .map_err(to_py_err)?;
    to_py(py, &summary.manifest)
}

#[pymodule]
fn pymacroq(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEnv>()?;
    m.add_class::<PyActionSet>()?;
    m.add_function(wrap_pyfunction!(lcs, m)?)?;
    m.add_function(wrap_pyfunction!(repetition_macros, m)?)?;
    m.add_function(wrap_pyfunction!(random_macros, m)?)?;
    m.add_function(wrap_pyfunction!(frequency_macros, m)?)?;
    m.add_function(wrap_pyfunction!(smdp_target, m)?)?;
    m.add_function(wrap_pyfunction!(action_gap, m)?)?;
    m.add_function(wrap_pyfunction!(run_trial, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
