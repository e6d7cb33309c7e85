//! Python bindings: the arena, recurrent policy networks, match evaluation and training.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use duelist_core::arena::{Arena, ArenaState, JointAction, Side, SkillMask, MOVE_ACTIONS};
use duelist_core::eval::{self, DelayDistribution, NetPolicy, NoOpPolicy, Policy, ScriptedPolicy, SingleAttackPolicy};
use duelist_core::policy::{self, NetShape, NetworkParams, RecurrentState};
use duelist_core::selfplay::{run_curriculum, CurriculumConfig};

fn side(name: &str) -> PyResult<Side> {
    match name {
        "agent" => Ok(Side::Agent),
        "opponent" => Ok(Side::Opponent),
        other => Err(PyValueError::new_err(format!("side must be 'agent' or 'opponent', got {other:?}"))),
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// A two-player match in progress.
///
///     env = Env(seed=3)
///     while not env.done:
///         mask = env.mask("agent")
///         env.step((0, 8), (0, 8))
#[pyclass]
struct Env {
    arena: Arena,
    state: ArenaState,
}

#[pymethods]
impl Env {
    #[new]
    #[pyo3(signature = (seed=0))]
    fn new(seed: u64) -> Self {
        let arena = Arena::default();
        let state = arena.reset(seed);
        Env { arena, state }
    }

    fn reset(&mut self, seed: u64) {
        self.state = self.arena.reset(seed);
    }

    #[getter]
    fn tick(&self) -> u32 {
        self.state.tick
    }

    #[getter]
    fn done(&self) -> bool {
        self.state.done
    }

    #[getter]
    fn num_skills(&self) -> usize {
        self.arena.num_skills()
    }

    #[getter]
    fn num_moves(&self) -> usize {
        MOVE_ACTIONS
    }

    /// "ongoing", "agent_win", "opponent_win" or "draw".
    #[getter]
    fn outcome(&self) -> String {
        serde_json::to_value(self.state.outcome).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
    }

    fn observe(&self, side_name: &str) -> PyResult<Vec<f32>> {
        Ok(self.arena.observe(&self.state, side(side_name)?))
    }

    fn mask(&self, side_name: &str) -> PyResult<Vec<bool>> {
        Ok(self.arena.available_skills(&self.state, side(side_name)?).to_bools())
    }

    /// HP of (agent, opponent).
    fn hp(&self) -> (f64, f64) {
        (self.state.agent.hp, self.state.opponent.hp)
    }

    /// Advance one tick with `(skill, move)` for each side; returns the two base rewards.
    fn step(&mut self, agent: (usize, usize), opponent: (usize, usize)) -> PyResult<(f64, f64)> {
        let r = self
            .arena
            .step(&self.state, JointAction::new(agent.0, agent.1), JointAction::new(opponent.0, opponent.1))
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        self.state = r.state;
        Ok((r.reward_agent, r.reward_opponent))
    }

    /// The full state as a JSON string.
    fn state_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.state).map_err(runtime)
    }
}

/// Recurrent policy network with masked skill and move heads.
#[pyclass]
struct Network {
    params: Arc<NetworkParams<f32>>,
}

#[pymethods]
impl Network {
    /// Fresh parameters sized for the default arena.
    #[staticmethod]
    #[pyo3(signature = (hidden=64, seed=0))]
    fn init(hidden: usize, seed: u64) -> Self {
        let shape = NetShape::for_arena(&Arena::default(), hidden);
        Network { params: Arc::new(NetworkParams::init(shape, seed)) }
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let params = policy::load_checkpoint(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        Ok(Network { params: Arc::new(params) })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        policy::save_checkpoint(&self.params, &path).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    #[getter]
    fn hidden(&self) -> usize {
        self.params.shape().hidden
    }

    fn __len__(&self) -> usize {
        self.params.len()
    }

    /// One recurrent step: returns `(skill_probs, move_probs, next_hidden)`.
    #[pyo3(signature = (obs, mask, hidden=None))]
    fn forward(&self, obs: Vec<f32>, mask: Vec<bool>, hidden: Option<Vec<f32>>) -> PyResult<(Vec<f32>, Vec<f32>, Vec<f32>)> {
        let h = match hidden {
            Some(h) if h.len() == self.params.shape().hidden => RecurrentState { hidden: h },
            Some(h) => return Err(PyValueError::new_err(format!("hidden state has {} entries", h.len()))),
            None => RecurrentState::zeros(self.params.shape().hidden),
        };
        let (out, next) = self.params.forward(&obs, &h, SkillMask::from_bools(&mask)).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok((out.skill_probs, out.move_probs, next.hidden))
    }
}

fn make_policy(spec: &Bound<'_, PyAny>) -> PyResult<Box<dyn Fn() -> Box<dyn Policy> + Send + Sync>> {
    if let Ok(net) = spec.extract::<PyRef<'_, Network>>() {
        let params = net.params.clone();
        return Ok(Box::new(move || Box::new(NetPolicy::new(params.clone())) as Box<dyn Policy>));
    }
    let name: String = spec.extract()?;
    Ok(match name.as_str() {
        "noop" => Box::new(|| Box::new(NoOpPolicy) as Box<dyn Policy>),
        "scripted" => Box::new(|| Box::new(ScriptedPolicy::default()) as Box<dyn Policy>),
        s if s.starts_with("single:") => {
            let skill: usize = s["single:".len()..].parse().map_err(|_| PyValueError::new_err("single:<skill>"))?;
            Box::new(move || Box::new(SingleAttackPolicy { skill }) as Box<dyn Policy>)
        }
        other => return Err(PyValueError::new_err(format!("unknown policy {other:?}"))),
    })
}

/// Play `count` matches; each policy is a `Network` or one of "noop", "scripted", "single:<skill>".
/// Returns the match report as a JSON string.
#[pyfunction]
#[pyo3(signature = (a, b, count=100, seed=0))]
fn play_matches(a: &Bound<'_, PyAny>, b: &Bound<'_, PyAny>, count: u64, seed: u64) -> PyResult<String> {
    let (make_a, make_b) = (make_policy(a)?, make_policy(b)?);
    let arena = Arena::default();
    let report = eval::play_matches(&arena, || make_a(), || make_b(), count, seed).map_err(runtime)?;
    let summary = serde_json::json!({
        "matches": report.matches,
        "wins_a": report.wins_a,
        "wins_b": report.wins_b,
        "draws": report.draws,
        "win_rate_a": report.win_rate_a,
        "ci95": report.ci95,
        "mean_ticks": report.mean_ticks,
    });
    Ok(summary.to_string())
}

/// Mean entropy (nats) of a list of move distributions.
#[pyfunction]
fn move_policy_entropy(dists: Vec<Vec<f64>>) -> f64 {
    eval::move_policy_entropy(&dists)
}

/// Mean of the reaction-delay distribution, in ticks.
#[pyfunction]
fn reaction_delay_mean() -> f64 {
    DelayDistribution::reaction().mean()
}

/// Run a curriculum from a TOML string; returns the per-style summary as JSON.
#[pyfunction]
fn train_curriculum(config_toml: &str) -> PyResult<String> {
    let cfg = CurriculumConfig::from_toml_str(config_toml).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let report = run_curriculum(&Arena::default(), &cfg, |_, _| {}).map_err(runtime)?;
    serde_json::to_string(&report.styles).map_err(runtime)
}

#[pymodule]
fn duelist(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Env>()?;
    m.add_class::<Network>()?;
    m.add_function(wrap_pyfunction!(play_matches, m)?)?;
    m.add_function(wrap_pyfunction!(move_policy_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(reaction_delay_mean, m)?)?;
    m.add_function(wrap_pyfunction!(train_curriculum, m)?)?;
    Ok(())
}
