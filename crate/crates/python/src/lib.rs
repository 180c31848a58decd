//! Python bindings: formulas, automata, models, learning and verification.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use specsynth::envs::{self, GridCase, GridSpec, PacmanSpec};
use specsynth::{assets, Error, LabelSet, LearnConfig, Product, Streams};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for specsynth::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn labels(ap: &specsynth::Alphabet, word: &[Vec<String>]) -> PyResult<Vec<LabelSet>> {
    word.iter()
        .map(|l| ap.label(l.iter().map(String::as_str)).py())
        .collect()
}

/// Parsed LTL formula.
#[pyclass(name = "Formula", module = "specsynth_py", frozen)]
struct PyFormula(specsynth::Formula);

#[pymethods]
impl PyFormula {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        Ok(PyFormula(specsynth::parse_ltl(text).py()?))
    }

    fn atoms(&self) -> Vec<String> {
        self.0.atoms().into_iter().collect()
    }

    /// Truth on the lasso `prefix · period^ω` over the propositions `ap`.
    fn holds(
        &self,
        ap: Vec<String>,
        prefix: Vec<Vec<String>>,
        period: Vec<Vec<String>>,
    ) -> PyResult<bool> {
        let ap = specsynth::Alphabet::new(ap).py()?;
        let w =
            specsynth::Lasso::new(ap.clone(), labels(&ap, &prefix)?, labels(&ap, &period)?).py()?;
        specsynth::holds_on_lasso(&self.0, &w).py()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.0 == other.0
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Formula({:?})", self.0.to_string())
    }
}

/// Limit-deterministic Büchi automaton.
#[pyclass(name = "Ldba", module = "specsynth_py", frozen)]
struct PyLdba(specsynth::Ldba);

#[pymethods]
impl PyLdba {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyLdba(specsynth::load_ldba(text).py()?))
    }

    /// One of `gfp`, `fgp`, `phi1`, `phi2`.
    #[staticmethod]
    fn shipped(name: &str) -> PyResult<Self> {
        Ok(PyLdba(assets::automaton(name).py()?))
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().py()
    }

    #[getter]
    fn num_states(&self) -> usize {
        self.0.num_states()
    }

    #[getter]
    fn initial(&self) -> usize {
        self.0.initial()
    }

    #[getter]
    fn alphabet(&self) -> Vec<String> {
        self.0.alphabet().names().to_vec()
    }

    #[getter]
    fn acceptance(&self) -> Vec<Vec<usize>> {
        self.0.acceptance().sets().to_vec()
    }

    fn sinks(&self) -> Vec<usize> {
        self.0.detect_sinks().into_iter().collect()
    }

    fn step(&self, q: usize, label: Vec<String>) -> PyResult<usize> {
        if q >= self.0.num_states() {
            return Err(PyValueError::new_err(format!("state {q} out of range")));
        }
        Ok(self.0.step(
            q,
            self.0
                .alphabet()
                .label(label.iter().map(String::as_str))
                .py()?,
        ))
    }

    fn accepts(&self, prefix: Vec<Vec<String>>, period: Vec<Vec<String>>) -> PyResult<bool> {
        let ap = self.0.alphabet();
        let w =
            specsynth::Lasso::new(ap.clone(), labels(ap, &prefix)?, labels(ap, &period)?).py()?;
        self.0.accepts_lasso(&w).py()
    }

    fn __repr__(&self) -> String {
        format!(
            "Ldba(states={}, acceptance={})",
            self.0.num_states(),
            self.0.acceptance().len()
        )
    }
}

/// Probabilistically-labeled MDP.
#[pyclass(name = "Plmdp", module = "specsynth_py", frozen)]
struct PyPlmdp(specsynth::Plmdp);

#[pymethods]
impl PyPlmdp {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyPlmdp(specsynth::load_plmdp(text).py()?))
    }

    /// Shipped or custom gridworld; `spec` is a JSON layout overriding `name`.
    #[staticmethod]
    #[pyo3(signature = (name="grid5", case="I", spec=None))]
    fn gridworld(name: &str, case: &str, spec: Option<&str>) -> PyResult<Self> {
        let spec = match spec {
            Some(t) => GridSpec::from_json(t).py()?,
            None => GridSpec::shipped(name).py()?,
        };
        let case: GridCase = case.parse().py()?;
        Ok(PyPlmdp(envs::make_gridworld(case, &spec).py()?))
    }

    #[staticmethod]
    #[pyo3(signature = (name="pacman5", spec=None))]
    fn pacman(name: &str, spec: Option<&str>) -> PyResult<Self> {
        let spec = match spec {
            Some(t) => PacmanSpec::from_json(t).py()?,
            None => PacmanSpec::shipped(name).py()?,
        };
        Ok(PyPlmdp(envs::make_pacman(&spec).py()?))
    }

    /// Counterexample model together with its automaton.
    #[staticmethod]
    fn counterexample(nu: f64) -> PyResult<(Self, PyLdba)> {
        let (m, a) = envs::make_counterexample(nu).py()?;
        Ok((PyPlmdp(m), PyLdba(a)))
    }

    #[staticmethod]
    #[pyo3(signature = (seed, n_states, n_actions=3, n_props=2))]
    fn random(seed: u64, n_states: usize, n_actions: usize, n_props: usize) -> PyResult<Self> {
        Ok(PyPlmdp(
            envs::random_plmdp(seed, n_states, n_actions, n_props).py()?,
        ))
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().py()
    }

    #[getter]
    fn num_states(&self) -> usize {
        self.0.num_states()
    }

    #[getter]
    fn initial(&self) -> usize {
        self.0.initial()
    }

    #[getter]
    fn alphabet(&self) -> Vec<String> {
        self.0.alphabet().names().to_vec()
    }

    fn actions(&self, x: usize) -> PyResult<Vec<String>> {
        self.check(x)?;
        Ok(self.0.actions(x).to_vec())
    }

    fn transition(&self, x: usize, action: &str) -> PyResult<Vec<(usize, f64)>> {
        self.check(x)?;
        let a = self.0.action_index(x, action).ok_or_else(|| {
            PyValueError::new_err(format!("action `{action}` not enabled in state {x}"))
        })?;
        Ok(self.0.transition(x, a).to_vec())
    }

    fn label_dist(&self, x: usize) -> PyResult<Vec<(Vec<String>, f64)>> {
        self.check(x)?;
        let ap = self.0.alphabet();
        Ok(self
            .0
            .label_dist(x)
            .iter()
            .map(|&(l, p)| (ap.names_of(l), p))
            .collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Plmdp(states={}, ap={:?})",
            self.0.num_states(),
            self.0.alphabet().names()
        )
    }
}

impl PyPlmdp {
    fn check(&self, x: usize) -> PyResult<()> {
        if x < self.0.num_states() {
            Ok(())
        } else {
            Err(PyValueError::new_err(format!("state {x} out of range")))
        }
    }
}

/// Result of a learning run; the policy is kept in its JSON form.
#[pyclass(name = "LearnResult", module = "specsynth_py", frozen, get_all)]
struct PyLearnResult {
    episodes: usize,
    converged: bool,
    steps: u64,
    sink_terminations: usize,
    horizon_terminations: usize,
    frontier_violations: u64,
    /// `(episode, U(s0))` pairs.
    curve: Vec<(usize, f64)>,
    policy_json: String,
    initial_value: f64,
}

#[pymethods]
impl PyLearnResult {
    fn __repr__(&self) -> String {
        format!(
            "LearnResult(episodes={}, converged={}, initial_value={:.6})",
            self.episodes, self.converged, self.initial_value
        )
    }
}

#[pyfunction]
#[pyo3(signature = (
    model, ldba, *, gamma=0.99, reward=1.0, tau=100, episodes=100_000, seed=0, epsilon_floor=0.01,
    window=1000, tolerance=1e-3, stride=100, reset_frontier=true, preread_initial_label=false,
))]
#[allow(clippy::too_many_arguments)]
fn learn(
    py: Python<'_>,
    model: &PyPlmdp,
    ldba: &PyLdba,
    gamma: f64,
    reward: f64,
    tau: usize,
    episodes: usize,
    seed: u64,
    epsilon_floor: f64,
    window: usize,
    tolerance: f64,
    stride: usize,
    reset_frontier: bool,
    preread_initial_label: bool,
) -> PyResult<PyLearnResult> {
    let cfg = LearnConfig {
        gamma,
        reward,
        tau,
        max_episodes: episodes,
        window,
        tolerance,
        seed,
        reset_frontier_per_episode: reset_frontier,
        epsilon_floor,
        preread_initial_label,
        curve_stride: stride,
    };
    let (m, a) = (&model.0, &ldba.0);
    let out = py.detach(|| specsynth::run_learning(m, a, &cfg)).py()?;
    let product = Product::new(m, a).py()?.with_preread(preread_initial_label);
    let policy = specsynth::extract_policy(&out.qtable);
    Ok(PyLearnResult {
        episodes: out.episodes,
        converged: out.converged,
        steps: out.steps,
        sink_terminations: out.sink_terminations,
        horizon_terminations: out.horizon_terminations,
        frontier_violations: out.frontier_violations,
        initial_value: specsynth::learner::initial_value(&out.qtable, &product),
        curve: out.curve.points,
        policy_json: policy.to_json(&product).py()?,
    })
}

/// Exact verification; returns the report as JSON text.
#[pyfunction]
#[pyo3(signature = (model, ldba, policy_json=None, state_cap=specsynth::product::DEFAULT_STATE_CAP))]
fn verify(
    py: Python<'_>,
    model: &PyPlmdp,
    ldba: &PyLdba,
    policy_json: Option<&str>,
    state_cap: usize,
) -> PyResult<String> {
    let product = Product::new(&model.0, &ldba.0).py()?;
    let policy = policy_json
        .map(|t| specsynth::Policy::from_json(t, &product))
        .transpose()
        .py()?;
    let report = py
        .detach(|| {
            let ex = product.enumerate(state_cap)?;
            specsynth::verify(&ex, &product, policy.as_ref())
        })
        .py()?;
    serde_json::to_string(&report).map_err(|e| py_err(e.into()))
}

/// Runs a policy for `horizon` steps; returns the trace as JSON text.
#[pyfunction]
#[pyo3(signature = (model, ldba, policy_json, horizon=100, seed=0))]
fn simulate(
    model: &PyPlmdp,
    ldba: &PyLdba,
    policy_json: &str,
    horizon: usize,
    seed: u64,
) -> PyResult<String> {
    let product = Product::new(&model.0, &ldba.0).py()?;
    let policy = specsynth::Policy::from_json(policy_json, &product).py()?;
    let trace =
        specsynth::execute_policy(&policy, &model.0, &ldba.0, &mut Streams::new(seed), horizon)
            .py()?;
    serde_json::to_string(&trace).map_err(|e| py_err(e.into()))
}

/// `(U_right, U_left)` of the counterexample; `n=None` is the unbounded horizon.
#[pyfunction]
#[pyo3(signature = (gamma, nu, reward=1.0, n=None))]
fn counterexample_returns(
    gamma: f64,
    nu: f64,
    reward: f64,
    n: Option<u64>,
) -> PyResult<(f64, f64)> {
    specsynth::counterexample_returns(gamma, nu, reward, n).py()
}

#[pyfunction]
fn counterexample_threshold(nu: f64) -> f64 {
    specsynth::counterexample_threshold(nu)
}

#[pymodule]
fn specsynth_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFormula>()?;
    m.add_class::<PyLdba>()?;
    m.add_class::<PyPlmdp>()?;
    m.add_class::<PyLearnResult>()?;
    m.add_function(wrap_pyfunction!(learn, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(counterexample_returns, m)?)?;
    m.add_function(wrap_pyfunction!(counterexample_threshold, m)?)?;
    Ok(())
}
