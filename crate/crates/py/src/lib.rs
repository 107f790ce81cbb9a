//! Python bindings. Structured results (summaries, verdicts, schedules) are
//! handed over as plain dicts via their JSON form.

use frog_core::analysis;
use frog_core::construction::{self, Schedule};
use frog_core::engine::{self, ActivationPolicy, SimConfig, SimState, StopCriteria, StopReason};
use frog_core::stream::{derive_stream, tag};
use frog_core::FrogError;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

fn err(e: FrogError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_json<T: serde::de::DeserializeOwned>(text: &str) -> PyResult<T> {
    serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Waiting-time law between jumps.
#[pyclass(name = "JumpLaw", module = "frogpy", from_py_object)]
#[derive(Clone)]
pub struct PyJumpLaw {
    inner: frog_core::JumpLaw,
}

impl PyJumpLaw {
    fn checked(inner: frog_core::JumpLaw) -> PyResult<Self> {
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }
}

#[pymethods]
impl PyJumpLaw {
    #[staticmethod]
    fn exponential(rate: f64) -> PyResult<Self> {
        Self::checked(frog_core::JumpLaw::exponential(rate))
    }

    #[staticmethod]
    fn point_mass(r: f64) -> PyResult<Self> {
        Self::checked(frog_core::JumpLaw::point_mass(r))
    }

    #[staticmethod]
    fn uniform(c: f64) -> PyResult<Self> {
        Self::checked(frog_core::JumpLaw::uniform(c))
    }

    #[staticmethod]
    fn brownian_hit(step: f64) -> PyResult<Self> {
        Self::checked(frog_core::JumpLaw::brownian_hit(step))
    }

    #[staticmethod]
    fn projected(base: &PyJumpLaw, d: u32) -> PyResult<Self> {
        Self::checked(frog_core::JumpLaw::projected(base.inner.clone(), d))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Self::checked(from_json(text)?)
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).unwrap_or_default()
    }

    fn mean(&self) -> f64 {
        self.inner.mean()
    }

    /// `(value, standard_error)` of the mass on `(0, r]`.
    fn mass_below(&self, r: f64) -> PyResult<(f64, f64)> {
        let m = self.inner.mass_below(r).map_err(err)?;
        Ok((m.value, m.std_error))
    }

    fn __repr__(&self) -> String {
        format!("JumpLaw({})", self.to_json())
    }
}

/// Law of the number of sleepers per site.
#[pyclass(name = "InitLaw", module = "frogpy", from_py_object)]
#[derive(Clone)]
pub struct PyInitLaw {
    inner: frog_core::InitLaw,
}

impl PyInitLaw {
    fn checked(inner: frog_core::InitLaw) -> PyResult<Self> {
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }
}

#[pymethods]
impl PyInitLaw {
    #[staticmethod]
    fn deterministic(k: u64) -> PyResult<Self> {
        Self::checked(frog_core::InitLaw::deterministic(k))
    }

    #[staticmethod]
    #[pyo3(signature = (alpha, cap = frog_core::laws::DEFAULT_CAP))]
    fn power_tail(alpha: f64, cap: u64) -> PyResult<Self> {
        Self::checked(frog_core::InitLaw::power_tail(alpha, cap))
    }

    #[staticmethod]
    #[pyo3(signature = (cap = frog_core::laws::DEFAULT_CAP))]
    fn log_tail(cap: u64) -> PyResult<Self> {
        Self::checked(frog_core::InitLaw::log_tail(cap))
    }

    #[staticmethod]
    fn atom_list(atoms: Vec<(u64, f64)>) -> PyResult<Self> {
        Self::checked(frog_core::InitLaw::atom_list(atoms))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Self::checked(from_json(text)?)
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).unwrap_or_default()
    }

    /// `P(eta >= b)`.
    fn tail_mass(&self, b: u64) -> f64 {
        self.inner.tail_mass(b)
    }

    fn __repr__(&self) -> String {
        format!("InitLaw({})", self.to_json())
    }
}

/// A running simulation on `Z^dim`.
#[pyclass(module = "frogpy", unsendable)]
pub struct Simulation {
    state: SimState,
    rows: Vec<engine::SeriesRow>,
    stop_reason: Option<StopReason>,
}

#[pymethods]
impl Simulation {
    #[new]
    #[pyo3(signature = (dim, pi, mu, seed = 0, t_max = 10.0, max_active = None, max_events = None, policy = None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        dim: usize,
        pi: &PyJumpLaw,
        mu: &PyInitLaw,
        seed: u64,
        t_max: Option<f64>,
        max_active: Option<u64>,
        max_events: Option<u64>,
        policy: Option<&str>,
    ) -> PyResult<Self> {
        let policy: ActivationPolicy = match policy {
            Some(text) => from_json(text)?,
            None => ActivationPolicy::Null,
        };
        let stop = StopCriteria { t_max, max_active, max_radius: None, max_events };
        let config = SimConfig::new(dim, pi.inner.clone(), mu.inner.clone(), seed).with_policy(policy).with_stop(stop);
        config.validate().map_err(err)?;
        let state = engine::init_sim(config).map_err(err)?;
        let rows = vec![engine::SeriesRow::snapshot(&state)];
        Ok(Self { state, rows, stop_reason: None })
    }

    /// Runs until a stop criterion fires and returns the summary.
    fn run<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let rows = &mut self.rows;
        let reason = self.state.run_observed(|s, _| rows.push(engine::SeriesRow::snapshot(s)));
        self.stop_reason = Some(reason);
        self.summary(py)
    }

    /// Processes all events up to time `t`; returns the stop reason if
    /// something other than time ended the run.
    fn advance_to(&mut self, t: f64) -> Option<String> {
        let reason = self.state.advance_to(t);
        self.rows.push(engine::SeriesRow::snapshot(&self.state));
        reason.map(|r| r.to_string())
    }

    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(
            py,
            &serde_json::json!({
                "stop_reason": self.stop_reason.map(|r| r.as_str()),
                "final_t": self.state.clock,
                "n_visited": self.state.n_visited(),
                "active": self.state.active_count(),
                "seed": self.state.config.seed,
            }),
        )
    }

    #[getter]
    fn clock(&self) -> f64 {
        self.state.clock
    }

    #[getter]
    fn n_visited(&self) -> usize {
        self.state.n_visited()
    }

    #[getter]
    fn active(&self) -> u64 {
        self.state.active_count()
    }

    #[getter]
    fn frontier_max(&self) -> Vec<i64> {
        self.state.frontier_max().to_vec()
    }

    #[getter]
    fn frontier_min(&self) -> Vec<i64> {
        self.state.frontier_min().to_vec()
    }

    /// `(site, first_visit_time)` in visit order.
    fn visited(&self) -> Vec<(Vec<i64>, f64)> {
        self.state.visited().map(|(s, t)| (s.clone(), t)).collect()
    }

    /// Recorded rows `(event, t, n_visited, active)`.
    fn series(&self) -> Vec<(u64, f64, u64, u64)> {
        self.rows.iter().map(|r| (r.event, r.t, r.n_visited, r.active)).collect()
    }
}

#[pyfunction]
fn g_bound(pi: &PyJumpLaw, r: f64, m: u64) -> PyResult<f64> {
    frog_core::laws::g_bound(&pi.inner, r, m).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (pi, r, m, samples = 100_000, seed = 0))]
fn verify_lapidation<'py>(
    py: Python<'py>,
    pi: &PyJumpLaw,
    r: f64,
    m: u64,
    samples: u64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let mut stream = derive_stream(seed, &[tag::TRIAL]);
    let v = analysis::verify_lapidation(&pi.inner, r, m, samples, &mut stream).map_err(err)?;
    to_py(py, &v)
}

#[pyfunction]
fn q_infinity_lower_bound<'py>(py: Python<'py>, p_q1: f64, n_max: usize) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &analysis::q_infinity_lower_bound(p_q1, n_max).map_err(err)?)
}

#[pyfunction]
fn product_bound(n_max: usize) -> f64 {
    analysis::product_bound(n_max)
}

fn preset(name: &str, n_max: usize, cap: u64) -> PyResult<Schedule> {
    let mut s = match name {
        "desk" => construction::desk_preset(n_max, cap),
        "summable" => construction::summable_preset(n_max),
        other => return Err(PyValueError::new_err(format!("unknown preset `{other}` (expected desk or summable)"))),
    }
    .map_err(err)?;
    s.cap = cap;
    Ok(s)
}

/// The schedule of a named preset as a dict.
#[pyfunction]
#[pyo3(signature = (name = "desk", n_max = 5, cap = construction::DESK_CAP))]
fn schedule<'py>(py: Python<'py>, name: &str, n_max: usize, cap: u64) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &preset(name, n_max, cap)?)
}

/// Runs the staged construction on a preset schedule.
#[pyfunction]
#[pyo3(signature = (seed, mu = None, name = "desk", n_max = 5, m_max = 3, cap = construction::DESK_CAP))]
fn run_construction<'py>(
    py: Python<'py>,
    seed: u64,
    mu: Option<&PyInitLaw>,
    name: &str,
    n_max: usize,
    m_max: usize,
    cap: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let s = preset(name, n_max, cap)?;
    let mu = mu.map_or_else(|| construction::desk_mu(cap), |m| m.inner.clone());
    to_py(py, &construction::run_construction(&s, &mu, seed, m_max).map_err(err)?)
}

/// Displacement and window verdicts of the construction at index `n`.
#[pyfunction]
#[pyo3(signature = (n, samples = 1000, seed = 0, mu = None, name = "desk", n_max = 5, cap = construction::DESK_CAP))]
#[allow(clippy::too_many_arguments)]
fn verify_step_inequalities<'py>(
    py: Python<'py>,
    n: usize,
    samples: u64,
    seed: u64,
    mu: Option<&PyInitLaw>,
    name: &str,
    n_max: usize,
    cap: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let s = preset(name, n_max, cap)?;
    let mu = mu.map_or_else(|| construction::desk_mu(cap), |m| m.inner.clone());
    let (d, w) = analysis::verify_step_inequalities(&s, &mu, n, samples, seed).map_err(err)?;
    to_py(py, &serde_json::json!({"displacement": d, "window": w}))
}

#[pyfunction]
#[pyo3(signature = (dim, pi, mu, times, replicas = 30, seed = 0, max_active = engine::DEFAULT_MAX_ACTIVE))]
#[allow(clippy::too_many_arguments)]
fn growth_curve<'py>(
    py: Python<'py>,
    dim: usize,
    pi: &PyJumpLaw,
    mu: &PyInitLaw,
    times: Vec<f64>,
    replicas: usize,
    seed: u64,
    max_active: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let t_max = times.last().copied().unwrap_or(1.0);
    let stop = StopCriteria { t_max: Some(t_max), max_active: Some(max_active), ..StopCriteria::default() };
    let cfg = SimConfig::new(dim, pi.inner.clone(), mu.inner.clone(), seed).with_stop(stop);
    to_py(py, &analysis::growth_curve(&cfg, &times, replicas).map_err(err)?)
}

#[pymodule]
fn frogpy(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyJumpLaw>()?;
    m.add_class::<PyInitLaw>()?;
    m.add_class::<Simulation>()?;
    m.add_function(wrap_pyfunction!(g_bound, m)?)?;
    m.add_function(wrap_pyfunction!(verify_lapidation, m)?)?;
    m.add_function(wrap_pyfunction!(q_infinity_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(product_bound, m)?)?;
    m.add_function(wrap_pyfunction!(schedule, m)?)?;
    m.add_function(wrap_pyfunction!(run_construction, m)?)?;
    m.add_function(wrap_pyfunction!(verify_step_inequalities, m)?)?;
    m.add_function(wrap_pyfunction!(growth_curve, m)?)?;
    Ok(())
}
