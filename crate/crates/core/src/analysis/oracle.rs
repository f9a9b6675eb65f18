use serde::{Deserialize, Serialize};

use crate::action::ActionSet;
use crate::envs::TabularModel;
use crate::error::{Error, Result};
use crate::qlearn::discount_pow;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const MAX_SWEEPS: usize = 1_000_000;

/// Outcome of running one output from one state in a deterministic model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub next: usize,
    /// Discounted reward accumulated along the way.
    pub reward: f64,
    pub duration: usize,
    pub terminal: bool,
}

/// Exhaustive `(state, output) → (next, reward, duration)` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitModel {
    pub state_count: usize,
    pub outputs: usize,
    /// States agents can act from.
    pub active: Vec<bool>,
    pub terminal: Vec<bool>,
    entries: Vec<Option<ModelEntry>>,
}

impl ExplicitModel {
    /// Rolls every enabled output of `set` out of every non-terminal state.
    pub fn build<M: TabularModel>(model: &M, set: &ActionSet, gamma: f64) -> Result<Self> {
        let state_count = model.state_count();
        let outputs = set.output_arity();
        let mut active = vec![false; state_count];
        let mut terminal = vec![false; state_count];
        let mut entries = vec![None; state_count * outputs];
        for s in model.states() {
            if model.is_terminal_state(s) {
                terminal[s] = true;
                continue;
            }
            active[s] = true;
            for idx in 0..outputs {
                if !set.is_enabled(idx) {
                    continue;
                }
                let mut state = s;
                let mut reward = 0.0;
                let mut discount = 1.0;
                let mut duration = 0;
                let mut ended = false;
                for a in set.expand_output_index(idx)? {
                    let (next, r, term) = model.model_step(state, a);
                    reward += discount * r;
                    discount *= gamma;
                    duration += 1;
                    state = next;
                    if term {
                        ended = true;
                        break;
                    }
                }
                entries[s * outputs + idx] = Some(ModelEntry {
                    next: state,
                    reward,
                    duration,
                    terminal: ended,
                });
            }
        }
        Ok(Self {
            state_count,
            outputs,
            active,
            terminal,
            entries,
        })
    }

    pub fn entry(&self, state: usize, output: usize) -> Option<&ModelEntry> {
        self.entries[state * self.outputs + output].as_ref()
    }

    pub fn is_atomic_only(&self) -> bool {
        self.entries.iter().flatten().all(|e| e.duration == 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub values: Vec<f64>,
    /// `q[s][i]`; `-inf` for outputs unavailable at `s`, all zero for
    /// terminal or blocked states.
    pub q: Vec<Vec<f64>>,
    /// Greedy output per state, lowest index on ties; `None` where no action
    /// is taken.
    pub policy: Vec<Option<usize>>,
    pub sweeps: usize,
    /// Max-norm change of each sweep.
    pub history: Vec<f64>,
}

fn solve(
    model: &ExplicitModel,
    gamma: f64,
    tol: f64,
    discount: impl Fn(&ModelEntry) -> f64,
) -> Result<OracleSolution> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "oracle discount must lie in (0, 1), got {gamma}"
        )));
    }
    let n = model.state_count;
    let backup = |values: &[f64], s: usize, i: usize| -> Option<f64> {
        model.entry(s, i).map(|e| {
            let future = if e.terminal { 0.0 } else { values[e.next] };
            e.reward + discount(e) * future
        })
    };
    let mut values = vec![0.0; n];
    let mut history = Vec::new();
    loop {
        if history.len() >= MAX_SWEEPS {
            return Err(Error::NotConverged {
                sweeps: history.len(),
                delta: history.last().copied().unwrap_or(f64::NAN),
            });
        }
        let mut next = vec![0.0; n];
        let mut delta: f64 = 0.0;
        for s in 0..n {
            if !model.active[s] {
                continue;
            }
            let best = (0..model.outputs)
                .filter_map(|i| backup(&values, s, i))
                .fold(f64::NEG_INFINITY, f64::max);
            next[s] = if best.is_finite() { best } else { 0.0 };
            delta = delta.max((next[s] - values[s]).abs());
        }
        values = next;
        history.push(delta);
        if delta < tol {
            break;
        }
    }
    let mut q = vec![vec![0.0; model.outputs]; n];
    let mut policy = vec![None; n];
    for s in 0..n {
        if !model.active[s] {
            continue;
        }
        for i in 0..model.outputs {
            q[s][i] = backup(&values, s, i).unwrap_or(f64::NEG_INFINITY);
        }
        let mut best: Option<usize> = None;
        for i in 0..model.outputs {
            if q[s][i].is_finite() && best.map_or(true, |b| q[s][i] > q[s][b]) {
                best = Some(i);
            }
        }
        policy[s] = best;
    }
    Ok(OracleSolution {
        values,
        q,
        policy,
        sweeps: history.len(),
        history,
    })
}

/// Bellman optimality iteration for a one-step model: `R + γ V(s')`.
pub fn value_iteration(model: &ExplicitModel, gamma: f64, tol: f64) -> Result<OracleSolution> {
    if !model.is_atomic_only() {
        return Err(Error::InvalidArgument(
            "value_iteration needs an atomic-only model; use smdp_value_iteration".into(),
        ));
    }
    solve(model, gamma, tol, |_| gamma)
}

/// Semi-MDP optimality iteration: `R + γ^τ V(s')` with τ from the model.
pub fn smdp_value_iteration(model: &ExplicitModel, gamma: f64, tol: f64) -> Result<OracleSolution> {
    solve(model, gamma, tol, |e| discount_pow(gamma, e.duration))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{Chain, Environment};
    use crate::macros::repetition_macros;

    fn chain_model(n: usize, gamma: f64, macros: bool) -> ExplicitModel {
        let env = Chain::new(n, 0.0).unwrap();
        let mut set = ActionSet::new(&env.action_labels()).unwrap();
        if macros {
            set.install(&repetition_macros(2, 3)).unwrap();
        }
        ExplicitModel::build(&env, &set, gamma).unwrap()
    }

    #[test]
    fn chain_five_start_value() {
        let sol = value_iteration(&chain_model(5, 0.9, false), 0.9, DEFAULT_TOLERANCE).unwrap();
        assert!((sol.values[0] - 0.729).abs() < 1e-9);
        assert_eq!(sol.values[4], 0.0);
        assert_eq!(sol.policy[0], Some(1));
        assert_eq!(sol.policy[4], None);
    }

    #[test]
    fn myopic_limit() {
        let gamma = 1e-12;
        let sol = value_iteration(&chain_model(5, gamma, false), gamma, 1e-15).unwrap();
        assert!(sol.values[0].abs() < 1e-9);
        assert!((sol.values[3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn value_iteration_refuses_macro_models() {
        assert!(value_iteration(&chain_model(5, 0.9, true), 0.9, 1e-10).is_err());
    }

    #[test]
    fn rejects_bad_discount() {
        assert!(value_iteration(&chain_model(5, 0.9, false), 1.0, 1e-10).is_err());
    }
}
