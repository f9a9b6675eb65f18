//! Deterministic episodic environments with discrete actions.

pub mod catch;
pub mod chain;
pub mod gridworld;

pub use catch::Catch;
pub use chain::Chain;
pub use gridworld::{Cell, Gridworld};

use serde::{Deserialize, Serialize};

use crate::action::ActionId;
use crate::error::Result;

pub const DEFAULT_MAX_EPISODE_STEPS: usize = 500;

/// An environment state as seen by the agent: an exact discrete id for
/// tabular learners plus a real-valued feature vector for approximators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub state: usize,
    pub features: Vec<f64>,
}

impl Observation {
    pub fn one_hot(state: usize, len: usize) -> Self {
        let mut features = vec![0.0; len];
        features[state] = 1.0;
        Self { state, features }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub terminal: bool,
    /// The episode hit its step cap without reaching a terminal state.
    pub truncated: bool,
}

impl StepOutcome {
    pub fn done(&self) -> bool {
        self.terminal || self.truncated
    }
}

pub trait Environment: Clone + Send {
    fn action_count(&self) -> usize;

    fn action_labels(&self) -> Vec<String>;

    fn is_deterministic(&self) -> bool {
        true
    }

    fn max_episode_steps(&self) -> usize;

    /// Number of distinct discrete state ids an observation can carry.
    fn state_count(&self) -> usize;

    fn feature_len(&self) -> usize;

    fn reset(&mut self, seed: u64) -> Observation;

    /// Fails with [`crate::Error::EpisodeOver`] once the episode has ended.
    fn step(&mut self, action: ActionId) -> Result<StepOutcome>;

    fn is_done(&self) -> bool;

    /// Best achievable undiscounted episode return, when known.
    fn optimal_return(&self) -> Option<f64> {
        None
    }
}

/// Environments whose full transition table can be enumerated.
pub trait TabularModel: Environment {
    /// Valid (reachable or at least non-blocked) state ids.
    fn states(&self) -> Vec<usize>;

    fn start_state(&self) -> usize;

    fn is_terminal_state(&self, state: usize) -> bool;

    /// Deterministic `(next_state, reward, terminal)` for one atomic action.
    fn model_step(&self, state: usize, action: ActionId) -> (usize, f64, bool);

    fn observation_of(&self, state: usize) -> Observation;

    /// Starts a fresh episode at an arbitrary state.
    fn reset_to(&mut self, state: usize) -> Result<Observation>;
}

/// Step counter and episode-over flag shared by the bundled environments.
#[derive(Debug, Clone, Default)]
pub(crate) struct EpisodeClock {
    pub steps: usize,
    pub done: bool,
}

impl EpisodeClock {
    pub fn reset(&mut self) {
        self.steps = 0;
        self.done = false;
    }

    pub fn check(&self, action: ActionId, count: usize) -> Result<()> {
        if self.done {
            return Err(crate::Error::EpisodeOver);
        }
        if action >= count {
            return Err(crate::Error::InvalidAction { action, count });
        }
        Ok(())
    }

    /// Advances one step; returns `truncated`.
    pub fn tick(&mut self, terminal: bool, cap: usize) -> bool {
        self.steps += 1;
        let truncated = !terminal && self.steps >= cap;
        self.done = terminal || truncated;
        truncated
    }
}

/// Serializable description of a bundled environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EnvSpec {
    Chain {
        n: usize,
        #[serde(default)]
        step_penalty: f64,
        #[serde(default = "default_cap")]
        max_episode_steps: usize,
    },
    Gridworld {
        #[serde(default)]
        width: Option<usize>,
        #[serde(default)]
        height: Option<usize>,
        #[serde(default)]
        walls: Vec<(usize, usize)>,
        #[serde(default)]
        goal: Option<(usize, usize)>,
        /// Path to a text layout; overrides the explicit fields.
        #[serde(default)]
        layout: Option<String>,
        #[serde(default = "default_cap")]
        max_episode_steps: usize,
    },
    Catch {
        grid: usize,
        #[serde(default = "default_frames")]
        frames: usize,
    },
}

fn default_cap() -> usize {
    DEFAULT_MAX_EPISODE_STEPS
}

fn default_frames() -> usize {
    4
}

impl EnvSpec {
    pub fn build(&self) -> Result<AnyEnv> {
        Ok(match self {
            EnvSpec::Chain {
                n,
                step_penalty,
                max_episode_steps,
            } => AnyEnv::Chain(Chain::new(*n, *step_penalty)?.with_max_episode_steps(*max_episode_steps)),
            EnvSpec::Gridworld {
                width,
                height,
                walls,
                goal,
                layout,
                max_episode_steps,
            } => {
                let g = match layout {
                    Some(path) => Gridworld::from_layout(&std::fs::read_to_string(path)?)?,
                    None => {
                        let missing = |f: &str| {
                            crate::Error::Config(format!(
                                "gridworld needs `{f}` when no `layout` file is given"
                            ))
                        };
                        let walls: Vec<Cell> =
                            walls.iter().map(|&(x, y)| Cell { x, y }).collect();
                        let (gx, gy) = goal.ok_or_else(|| missing("goal"))?;
                        Gridworld::new(
                            width.ok_or_else(|| missing("width"))?,
                            height.ok_or_else(|| missing("height"))?,
                            &walls,
                            Cell { x: gx, y: gy },
                        )?
                    }
                };
                AnyEnv::Gridworld(g.with_max_episode_steps(*max_episode_steps))
            }
            EnvSpec::Catch { grid, frames } => AnyEnv::Catch(Catch::new(*grid, *frames)?),
        })
    }
}

/// Closed set of bundled environments, so runners can pick one at runtime.
#[derive(Debug, Clone)]
pub enum AnyEnv {
    Chain(Chain),
    Gridworld(Gridworld),
    Catch(Catch),
}

macro_rules! dispatch {
    ($self:ident, $e:ident => $body:expr) => {
        match $self {
            AnyEnv::Chain($e) => $body,
            AnyEnv::Gridworld($e) => $body,
            AnyEnv::Catch($e) => $body,
        }
    };
}

impl Environment for AnyEnv {
    fn action_count(&self) -> usize {
        dispatch!(self, e => e.action_count())
    }
    fn action_labels(&self) -> Vec<String> {
        dispatch!(self, e => e.action_labels())
    }
    fn max_episode_steps(&self) -> usize {
        dispatch!(self, e => e.max_episode_steps())
    }
    fn state_count(&self) -> usize {
        dispatch!(self, e => e.state_count())
    }
    fn feature_len(&self) -> usize {
        dispatch!(self, e => e.feature_len())
    }
    fn reset(&mut self, seed: u64) -> Observation {
        dispatch!(self, e => e.reset(seed))
    }
    fn step(&mut self, action: ActionId) -> Result<StepOutcome> {
        dispatch!(self, e => e.step(action))
    }
    fn is_done(&self) -> bool {
        dispatch!(self, e => e.is_done())
    }
    fn optimal_return(&self) -> Option<f64> {
        dispatch!(self, e => e.optimal_return())
    }
}

/// Undiscounted return of following the oracle-optimal policy from the start
/// state of an enumerable environment.
pub fn oracle_optimal_return<M: TabularModel>(model: &M, gamma: f64) -> Result<f64> {
    let set = crate::action::ActionSet::with_capacity(&model.action_labels(), 0)?;
    let explicit = crate::analysis::ExplicitModel::build(model, &set, gamma)?;
    let solution = crate::analysis::value_iteration(&explicit, gamma, 1e-10)?;
    let mut state = model.start_state();
    let mut total = 0.0;
    for _ in 0..model.max_episode_steps() {
        let Some(action) = solution.policy[state] else {
            break;
        };
        let (next, reward, terminal) = model.model_step(state, action);
        total += reward;
        state = next;
        if terminal {
            break;
        }
    }
    Ok(total)
}
