use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::replay::DEFAULT_REPLAY_CAPACITY;

use super::backend::DEFAULT_HIDDEN;

/// Replacement epochs used over a 50-epoch run.
pub const REFERENCE_REPLACEMENT_EPOCHS: [usize; 4] = [6, 13, 25, 50];
pub const REFERENCE_EPOCHS: usize = 50;

/// Scales the reference schedule to `epochs`, rounding down and dropping
/// duplicates and zeros.
pub fn scaled_replacement_epochs(epochs: usize) -> Vec<usize> {
    let mut out: Vec<usize> = REFERENCE_REPLACEMENT_EPOCHS
        .iter()
        .map(|&k| k * epochs / REFERENCE_EPOCHS)
        .filter(|&k| k > 0)
        .collect();
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub gamma: f64,
    #[serde(default = "d_alpha")]
    pub alpha: f64,
    #[serde(default = "d_eps_start")]
    pub epsilon_start: f64,
    #[serde(default = "d_eps_end")]
    pub epsilon_end: f64,
    /// Steps of linear decay from start to end; defaults to 10% of the budget.
    #[serde(default)]
    pub epsilon_decay_steps: Option<usize>,
    #[serde(default = "d_eps_reset")]
    pub epsilon_reset: f64,
    #[serde(default = "d_eps_eval")]
    pub epsilon_eval: f64,
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    /// Environment steps per epoch.
    #[serde(default = "d_epoch_length")]
    pub epoch_length: usize,
    #[serde(default = "d_eval_episodes")]
    pub eval_episodes: usize,
    /// Epochs (1-based) after which macros are recomputed. Defaults to the
    /// reference schedule scaled to `epochs`.
    #[serde(default)]
    pub replacement_epochs: Option<Vec<usize>>,
    #[serde(default = "d_sync")]
    pub target_sync_period: usize,
    #[serde(default = "d_batch")]
    pub batch: usize,
    /// Decisions between replay updates.
    #[serde(default = "d_train_every")]
    pub train_every: usize,
    #[serde(default = "d_replay")]
    pub replay_capacity: usize,
    /// Replay size before updates start; defaults to `batch`.
    #[serde(default)]
    pub learning_starts: Option<usize>,
    #[serde(default = "d_hidden")]
    pub hidden: usize,
    #[serde(default)]
    pub seed: u64,
}

fn d_alpha() -> f64 {
    0.1
}
fn d_eps_start() -> f64 {
    1.0
}
fn d_eps_end() -> f64 {
    0.05
}
fn d_eps_reset() -> f64 {
    0.5
}
fn d_eps_eval() -> f64 {
    0.05
}
fn d_epochs() -> usize {
    100
}
fn d_epoch_length() -> usize {
    20_000
}
fn d_eval_episodes() -> usize {
    10
}
fn d_sync() -> usize {
    1_000
}
fn d_batch() -> usize {
    32
}
fn d_train_every() -> usize {
    1
}
fn d_replay() -> usize {
    DEFAULT_REPLAY_CAPACITY
}
fn d_hidden() -> usize {
    DEFAULT_HIDDEN
}

impl AgentConfig {
    /// Defaults everywhere except the discount.
    pub fn with_gamma(gamma: f64) -> Self {
        Self {
            gamma,
            alpha: d_alpha(),
            epsilon_start: d_eps_start(),
            epsilon_end: d_eps_end(),
            epsilon_decay_steps: None,
            epsilon_reset: d_eps_reset(),
            epsilon_eval: d_eps_eval(),
            epochs: d_epochs(),
            epoch_length: d_epoch_length(),
            eval_episodes: d_eval_episodes(),
            replacement_epochs: None,
            target_sync_period: d_sync(),
            batch: d_batch(),
            train_every: d_train_every(),
            replay_capacity: d_replay(),
            learning_starts: None,
            hidden: d_hidden(),
            seed: 0,
        }
    }

    pub fn total_steps(&self) -> usize {
        self.epochs * self.epoch_length
    }

    pub fn decay_steps(&self) -> usize {
        self.epsilon_decay_steps
            .unwrap_or_else(|| (self.total_steps() / 10).max(1))
    }

    pub fn replacement_schedule(&self) -> Vec<usize> {
        match &self.replacement_epochs {
            Some(k) => {
                let mut k = k.clone();
                k.sort_unstable();
                k.dedup();
                k
            }
            None => scaled_replacement_epochs(self.epochs),
        }
    }

    pub fn learning_starts(&self) -> usize {
        self.learning_starts.unwrap_or(self.batch).max(self.batch)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, why: String| Err(Error::Config(format!("agent.{field}: {why}")));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return fail("gamma", format!("must lie in (0, 1], got {}", self.gamma));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return fail("alpha", format!("must be positive, got {}", self.alpha));
        }
        for (name, v) in [
            ("epsilon_start", self.epsilon_start),
            ("epsilon_end", self.epsilon_end),
            ("epsilon_reset", self.epsilon_reset),
            ("epsilon_eval", self.epsilon_eval),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(name, format!("must lie in [0, 1], got {v}"));
            }
        }
        if self.epsilon_end > self.epsilon_start {
            return fail("epsilon_end", "must not exceed epsilon_start".into());
        }
        for (name, v) in [
            ("epochs", self.epochs),
            ("epoch_length", self.epoch_length),
            ("eval_episodes", self.eval_episodes),
            ("batch", self.batch),
            ("train_every", self.train_every),
            ("target_sync_period", self.target_sync_period),
            ("hidden", self.hidden),
        ] {
            if v == 0 {
                return fail(name, "must be at least 1".into());
            }
        }
        if self.replay_capacity < self.batch {
            return fail("replay_capacity", "must hold at least one batch".into());
        }
        if let Some(k) = &self.replacement_epochs {
            if let Some(bad) = k.iter().find(|&&e| e == 0 || e > self.epochs) {
                return fail(
                    "replacement_epochs",
                    format!("epoch {bad} is outside 1..={}", self.epochs),
                );
            }
        }
        Ok(())
    }
}

/// Linear ε decay that can be bumped back up and keeps its per-step rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exploration {
    value: f64,
    end: f64,
    rate: f64,
}

impl Exploration {
    pub fn new(start: f64, end: f64, decay_steps: usize) -> Self {
        let rate = if decay_steps == 0 {
            f64::INFINITY
        } else {
            (start - end) / decay_steps as f64
        };
        Self {
            value: start.clamp(end, 1.0),
            end,
            rate,
        }
    }

    pub fn from_config(cfg: &AgentConfig) -> Self {
        Self::new(cfg.epsilon_start, cfg.epsilon_end, cfg.decay_steps())
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn advance(&mut self, steps: usize) {
        self.value = (self.value - self.rate * steps as f64).max(self.end);
    }

    pub fn reset_to(&mut self, value: f64) {
        self.value = value.clamp(self.end, 1.0);
    }
}
