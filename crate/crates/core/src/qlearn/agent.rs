use rand::Rng;

use crate::action::{ActionId, ActionSet};
use crate::envs::{Environment, Observation};
use crate::error::{Error, Result};
use crate::replay::Transition;

use super::QFunction;

/// `γ^τ`, built by repeated multiplication so that `τ = 1` yields `γ` exactly.
pub fn discount_pow(gamma: f64, tau: usize) -> f64 {
    (1..tau).fold(gamma, |d, _| d * gamma)
}

/// Largest value over enabled outputs.
pub fn masked_max(q: &[f64], enabled: &[bool]) -> Option<f64> {
    q.iter()
        .zip(enabled)
        .filter(|(_, &e)| e)
        .map(|(&v, _)| v)
        .fold(None, |best, v| match best {
            Some(b) if b >= v => Some(b),
            _ => Some(v),
        })
}

/// Semi-MDP bootstrap target: `reward_cum + γ^τ · max_enabled(next_q)`, or
/// just `reward_cum` when the transition ended the episode.
pub fn smdp_target(
    reward_cum: f64,
    tau: usize,
    gamma: f64,
    next_q: &[f64],
    enabled: &[bool],
    terminal: bool,
) -> Result<f64> {
    if tau == 0 {
        return Err(Error::InvalidArgument("tau must be at least 1".into()));
    }
    if terminal {
        return Ok(reward_cum);
    }
    let best = masked_max(next_q, enabled).ok_or(Error::NoEnabledOutputs)?;
    Ok(reward_cum + discount_pow(gamma, tau) * best)
}

/// Greedy index over enabled outputs; ties go to the lowest index.
pub fn masked_argmax(q: &[f64], enabled: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (&v, &e)) in q.iter().zip(enabled).enumerate() {
        if e && best.map_or(true, |b| v > q[b]) {
            best = Some(i);
        }
    }
    best
}

/// ε-greedy over the enabled outputs only.
pub fn select_output<R: Rng + ?Sized>(
    q: &[f64],
    enabled: &[bool],
    epsilon: f64,
    rng: &mut R,
) -> Result<usize> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in [0, 1], got {epsilon}"
        )));
    }
    let explore = rng.gen::<f64>() < epsilon;
    if explore {
        let n = enabled.iter().filter(|&&e| e).count();
        if n == 0 {
            return Err(Error::NoEnabledOutputs);
        }
        let pick = rng.gen_range(0..n);
        Ok(enabled
            .iter()
            .enumerate()
            .filter(|(_, &e)| e)
            .nth(pick)
            .map(|(i, _)| i)
            .expect("pick < n"))
    } else {
        masked_argmax(q, enabled).ok_or(Error::NoEnabledOutputs)
    }
}

/// Result of running one output (atomic or macro) to completion.
#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    /// `Σ_{k=1..τ} γ^{k-1} r_{t+k}`
    pub reward_cum: f64,
    /// Undiscounted sum of the same rewards.
    pub reward_sum: f64,
    pub tau: usize,
    pub observation: Observation,
    pub terminal: bool,
    pub truncated: bool,
    /// Atomic actions actually executed, in order.
    pub actions: Vec<ActionId>,
    /// Observation after each atomic step.
    pub visited: Vec<Observation>,
}

/// Runs an output open-loop. A macro stops early only when the episode ends.
pub fn execute_output<E: Environment>(
    env: &mut E,
    set: &ActionSet,
    index: usize,
    gamma: f64,
) -> Result<Execution> {
    if env.is_done() {
        return Err(Error::EpisodeOver);
    }
    let sequence = set.expand_output_index(index)?;
    let mut reward_cum = 0.0;
    let mut reward_sum = 0.0;
    let mut discount = 1.0;
    let mut actions = Vec::with_capacity(sequence.len());
    let mut visited = Vec::with_capacity(sequence.len());
    let (mut terminal, mut truncated) = (false, false);
    for a in sequence {
        let out = env.step(a)?;
        reward_cum += discount * out.reward;
        reward_sum += out.reward;
        discount *= gamma;
        actions.push(a);
        visited.push(out.observation);
        terminal = out.terminal;
        truncated = out.truncated;
        if terminal || truncated {
            break;
        }
    }
    Ok(Execution {
        reward_cum,
        reward_sum,
        tau: actions.len(),
        observation: visited.last().cloned().expect("at least one step"),
        terminal,
        truncated,
        actions,
        visited,
    })
}

/// Whether a stored transition still refers to the macro it was recorded with.
pub fn is_current(t: &Transition, set: &ActionSet) -> bool {
    t.output_index < set.output_arity()
        && set.is_enabled(t.output_index)
        && set.slot_version(t.output_index) == t.slot_version
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub applied: usize,
    pub dropped_stale: usize,
    pub mean_abs_td: f64,
}

/// Applies one update per transition in `batch`. Targets bootstrap from
/// `target_source` when given, otherwise from `qf` itself. Transitions whose
/// macro slot has since been replaced are skipped.
pub fn q_update<Q: QFunction>(
    qf: &mut Q,
    batch: &[&Transition],
    set: &ActionSet,
    gamma: f64,
    alpha: f64,
    target_source: Option<&Q>,
) -> Result<UpdateStats> {
    let enabled = set.enabled_mask();
    let mut stats = UpdateStats::default();
    let mut td_total = 0.0;
    for t in batch {
        if !is_current(t, set) {
            stats.dropped_stale += 1;
            continue;
        }
        let target = if t.terminal {
            t.reward_cum
        } else {
            let next_q = match target_source {
                Some(src) => src.predict(&t.next_state),
                None => qf.predict(&t.next_state),
            };
            smdp_target(t.reward_cum, t.tau, gamma, &next_q, &enabled, false)?
        };
        if !target.is_finite() {
            return Err(Error::NonFinite(format!(
                "target {target} for output {} (reward {}, tau {})",
                t.output_index, t.reward_cum, t.tau
            )));
        }
        let current = qf.predict(&t.state)[t.output_index];
        td_total += (target - current).abs();
        qf.update(&t.state, t.output_index, target, alpha)?;
        stats.applied += 1;
    }
    if stats.applied > 0 {
        stats.mean_abs_td = td_total / stats.applied as f64;
    }
    Ok(stats)
}
