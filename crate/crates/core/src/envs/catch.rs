use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EpisodeClock, Environment, Observation, StepOutcome};
use crate::action::ActionId;
use crate::error::{Error, Result};

pub const LEFT: ActionId = 0;
pub const STAY: ActionId = 1;
pub const RIGHT: ActionId = 2;

/// A ball falls one row per step from a seeded random top column; a one-cell
/// paddle on the bottom row tries to meet it. The observation is the last
/// `frames` binary frames stacked oldest first, zero-padded at episode start.
#[derive(Debug, Clone)]
pub struct Catch {
    grid: usize,
    frames: usize,
    ball_row: usize,
    ball_col: usize,
    paddle: usize,
    history: VecDeque<Vec<f64>>,
    clock: EpisodeClock,
}

impl Catch {
    pub fn new(grid: usize, frames: usize) -> Result<Self> {
        if grid < 5 {
            return Err(Error::InvalidEnvironment(format!(
                "catch grid must be at least 5, got {grid}"
            )));
        }
        if frames == 0 {
            return Err(Error::InvalidEnvironment("frames_stacked must be >= 1".into()));
        }
        let mut env = Self {
            grid,
            frames,
            ball_row: 0,
            ball_col: 0,
            paddle: grid / 2,
            history: VecDeque::with_capacity(frames),
            clock: EpisodeClock::default(),
        };
        env.reset(0);
        Ok(env)
    }

    pub fn ball(&self) -> (usize, usize) {
        (self.ball_row, self.ball_col)
    }

    pub fn paddle(&self) -> usize {
        self.paddle
    }

    fn frame(&self) -> Vec<f64> {
        let mut f = vec![0.0; self.grid * self.grid];
        f[self.ball_row * self.grid + self.ball_col] = 1.0;
        f[(self.grid - 1) * self.grid + self.paddle] = 1.0;
        f
    }

    fn state_id(&self) -> usize {
        (self.ball_row * self.grid + self.ball_col) * self.grid + self.paddle
    }

    fn observe(&self) -> Observation {
        let features = self.history.iter().flatten().copied().collect();
        Observation {
            state: self.state_id(),
            features,
        }
    }

    fn push_frame(&mut self) {
        if self.history.len() == self.frames {
            self.history.pop_front();
        }
        self.history.push_back(self.frame());
    }
}

impl Environment for Catch {
    fn action_count(&self) -> usize {
        3
    }

    fn action_labels(&self) -> Vec<String> {
        vec!["left".into(), "stay".into(), "right".into()]
    }

    fn max_episode_steps(&self) -> usize {
        self.grid - 1
    }

    fn state_count(&self) -> usize {
        self.grid * self.grid * self.grid
    }

    fn feature_len(&self) -> usize {
        self.frames * self.grid * self.grid
    }

    fn reset(&mut self, seed: u64) -> Observation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.ball_col = rng.gen_range(0..self.grid);
        self.ball_row = 0;
        self.paddle = self.grid / 2;
        self.clock.reset();
        self.history.clear();
        for _ in 1..self.frames {
            self.history.push_back(vec![0.0; self.grid * self.grid]);
        }
        self.push_frame();
        self.observe()
    }

    fn step(&mut self, action: ActionId) -> Result<StepOutcome> {
        self.clock.check(action, 3)?;
        self.paddle = match action {
            LEFT => self.paddle.saturating_sub(1),
            RIGHT => (self.paddle + 1).min(self.grid - 1),
            _ => self.paddle,
        };
        self.ball_row += 1;
        let terminal = self.ball_row == self.grid - 1;
        let reward = match (terminal, self.paddle == self.ball_col) {
            (false, _) => 0.0,
            (true, true) => 1.0,
            (true, false) => -1.0,
        };
        let truncated = self.clock.tick(terminal, self.grid - 1);
        self.push_frame();
        Ok(StepOutcome {
            observation: self.observe(),
            reward,
            terminal,
            truncated,
        })
    }

    fn is_done(&self) -> bool {
        self.clock.done
    }

    fn optimal_return(&self) -> Option<f64> {
        Some(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn episode_lasts_grid_minus_one_steps() {
        let mut env = Catch::new(5, 1).unwrap();
        env.reset(3);
        let mut steps = 0;
        loop {
            let out = env.step(STAY).unwrap();
            steps += 1;
            if out.terminal {
                break;
            }
        }
        assert_eq!(steps, 4);
        assert!(env.step(STAY).is_err());
    }

    #[test]
    fn first_observation_is_zero_padded() {
        let mut env = Catch::new(5, 4).unwrap();
        let obs = env.reset(11);
        assert_eq!(obs.features.len(), 4 * 25);
        assert!(obs.features[..75].iter().all(|&v| v == 0.0));
        let current = &obs.features[75..];
        assert_eq!(current.iter().filter(|&&v| v == 1.0).count(), 2);
        let (row, col) = env.ball();
        assert_eq!(current[row * 5 + col], 1.0);
        assert_eq!(current[20 + env.paddle()], 1.0);
    }

    #[test]
    fn catching_the_ball_pays_plus_one() {
        let mut env = Catch::new(5, 2).unwrap();
        env.reset(5);
        let target = env.ball().1;
        let mut last = None;
        for _ in 0..4 {
            let a = match env.paddle().cmp(&target) {
                std::cmp::Ordering::Less => RIGHT,
                std::cmp::Ordering::Greater => LEFT,
                std::cmp::Ordering::Equal => STAY,
            };
            last = Some(env.step(a).unwrap());
        }
        let last = last.unwrap();
        assert!(last.terminal);
        assert_eq!(last.reward, 1.0);
    }

    #[test]
    fn missing_the_ball_pays_minus_one() {
        let mut env = Catch::new(5, 1).unwrap();
        env.reset(5);
        let target = env.ball().1;
        let away = if target < 2 { RIGHT } else { LEFT };
        let mut last = None;
        for _ in 0..4 {
            last = Some(env.step(away).unwrap());
        }
        assert_eq!(last.unwrap().reward, -1.0);
    }

    #[test]
    fn rejects_small_grid() {
        assert!(Catch::new(4, 1).is_err());
        assert!(Catch::new(5, 0).is_err());
    }
}
