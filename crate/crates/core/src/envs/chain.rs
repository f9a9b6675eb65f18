use super::{EpisodeClock, Environment, Observation, StepOutcome, TabularModel};
use crate::action::ActionId;
use crate::error::{Error, Result};

pub const LEFT: ActionId = 0;
pub const RIGHT: ActionId = 1;

/// States `s0..s(n-1)` on a line. `right` moves up by one, `left` moves down
/// by one (clamped at `s0`). Entering `s(n-1)` pays 1.0 and ends the episode;
/// every step additionally pays `step_penalty`.
#[derive(Debug, Clone)]
pub struct Chain {
    n: usize,
    step_penalty: f64,
    max_episode_steps: usize,
    position: usize,
    clock: EpisodeClock,
}

impl Chain {
    pub fn new(n: usize, step_penalty: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidEnvironment(format!(
                "chain needs at least 2 states, got {n}"
            )));
        }
        if !step_penalty.is_finite() {
            return Err(Error::InvalidEnvironment("step penalty must be finite".into()));
        }
        Ok(Self {
            n,
            step_penalty,
            max_episode_steps: super::DEFAULT_MAX_EPISODE_STEPS,
            position: 0,
            clock: EpisodeClock::default(),
        })
    }

    pub fn with_max_episode_steps(mut self, cap: usize) -> Self {
        self.max_episode_steps = cap.max(1);
        self
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn position(&self) -> usize {
        self.position
    }
}

impl Environment for Chain {
    fn action_count(&self) -> usize {
        2
    }

    fn action_labels(&self) -> Vec<String> {
        vec!["left".into(), "right".into()]
    }

    fn max_episode_steps(&self) -> usize {
        self.max_episode_steps
    }

    fn state_count(&self) -> usize {
        self.n
    }

    fn feature_len(&self) -> usize {
        self.n
    }

    fn reset(&mut self, _seed: u64) -> Observation {
        self.position = 0;
        self.clock.reset();
        self.observation_of(0)
    }

    fn step(&mut self, action: ActionId) -> Result<StepOutcome> {
        self.clock.check(action, 2)?;
        let (next, reward, terminal) = self.model_step(self.position, action);
        self.position = next;
        let truncated = self.clock.tick(terminal, self.max_episode_steps);
        Ok(StepOutcome {
            observation: self.observation_of(next),
            reward,
            terminal,
            truncated,
        })
    }

    fn is_done(&self) -> bool {
        self.clock.done
    }

    fn optimal_return(&self) -> Option<f64> {
        Some(1.0 + self.step_penalty * (self.n - 1) as f64)
    }
}

impl TabularModel for Chain {
    fn states(&self) -> Vec<usize> {
        (0..self.n).collect()
    }

    fn start_state(&self) -> usize {
        0
    }

    fn is_terminal_state(&self, state: usize) -> bool {
        state == self.n - 1
    }

    fn model_step(&self, state: usize, action: ActionId) -> (usize, f64, bool) {
        let next = match action {
            LEFT => state.saturating_sub(1),
            _ => (state + 1).min(self.n - 1),
        };
        let terminal = next == self.n - 1;
        let bonus = if terminal { 1.0 } else { 0.0 };
        (next, bonus + self.step_penalty, terminal)
    }

    fn observation_of(&self, state: usize) -> Observation {
        Observation::one_hot(state, self.n)
    }

    fn reset_to(&mut self, state: usize) -> Result<Observation> {
        if state >= self.n {
            return Err(Error::InvalidArgument(format!("state {state} not in chain")));
        }
        self.position = state;
        self.clock.reset();
        self.clock.done = self.is_terminal_state(state);
        Ok(self.observation_of(state))
    }
}
