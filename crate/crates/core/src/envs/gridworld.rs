use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{EpisodeClock, Environment, Observation, StepOutcome, TabularModel};
use crate::action::ActionId;
use crate::error::{Error, Result};

pub const UP: ActionId = 0;
pub const DOWN: ActionId = 1;
pub const LEFT: ActionId = 2;
pub const RIGHT: ActionId = 3;

/// Grid cell; `x` is the column, `y` the row, `(0, 0)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

#[derive(Debug, Clone)]
pub struct Gridworld {
    width: usize,
    height: usize,
    walls: Vec<bool>,
    goal: usize,
    start: usize,
    max_episode_steps: usize,
    position: usize,
    clock: EpisodeClock,
}

impl Gridworld {
    /// Open grid with the start fixed at `(0, 0)`.
    pub fn new(width: usize, height: usize, walls: &[Cell], goal: Cell) -> Result<Self> {
        Self::with_start(width, height, walls, Cell { x: 0, y: 0 }, goal)
    }

    pub fn with_start(
        width: usize,
        height: usize,
        walls: &[Cell],
        start: Cell,
        goal: Cell,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidEnvironment("grid must be non-empty".into()));
        }
        let inside = |c: Cell| c.x < width && c.y < height;
        for (name, c) in [("start", start), ("goal", goal)] {
            if !inside(c) {
                return Err(Error::InvalidEnvironment(format!(
                    "{name} ({}, {}) lies outside the {width}x{height} grid",
                    c.x, c.y
                )));
            }
        }
        let mut wall_mask = vec![false; width * height];
        for &w in walls {
            if !inside(w) {
                return Err(Error::InvalidEnvironment(format!(
                    "wall ({}, {}) lies outside the grid",
                    w.x, w.y
                )));
            }
            wall_mask[w.y * width + w.x] = true;
        }
        let goal_id = goal.y * width + goal.x;
        let start_id = start.y * width + start.x;
        if wall_mask[goal_id] {
            return Err(Error::InvalidEnvironment("goal is inside a wall".into()));
        }
        if wall_mask[start_id] {
            return Err(Error::InvalidEnvironment("start is inside a wall".into()));
        }
        if start_id == goal_id {
            return Err(Error::InvalidEnvironment("start and goal coincide".into()));
        }
        let grid = Self {
            width,
            height,
            walls: wall_mask,
            goal: goal_id,
            start: start_id,
            max_episode_steps: super::DEFAULT_MAX_EPISODE_STEPS,
            position: start_id,
            clock: EpisodeClock::default(),
        };
        if !grid.reachable_from_start()[goal_id] {
            return Err(Error::InvalidEnvironment(
                "goal is unreachable from the start cell".into(),
            ));
        }
        Ok(grid)
    }

    /// Parses a text layout: `#` wall, `.` floor, `S` start, `G` goal.
    pub fn from_layout(text: &str) -> Result<Self> {
        let rows: Vec<&str> = text
            .lines()
            .map(str::trim_end)
            .filter(|l| !l.is_empty())
            .collect();
        if rows.is_empty() {
            return Err(Error::InvalidEnvironment("empty layout".into()));
        }
        let width = rows[0].chars().count();
        let mut walls = Vec::new();
        let (mut start, mut goal) = (None, None);
        for (y, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(Error::Parse {
                    line: y + 1,
                    column: 1,
                    message: format!("row has {} cells, expected {width}", row.chars().count()),
                });
            }
            for (x, ch) in row.chars().enumerate() {
                let cell = Cell { x, y };
                match ch {
                    '#' => walls.push(cell),
                    '.' => {}
                    'S' if start.is_none() => start = Some(cell),
                    'G' if goal.is_none() => goal = Some(cell),
                    'S' | 'G' => {
                        return Err(Error::Parse {
                            line: y + 1,
                            column: x + 1,
                            message: format!("duplicate `{ch}`"),
                        })
                    }
                    other => {
                        return Err(Error::Parse {
                            line: y + 1,
                            column: x + 1,
                            message: format!("unexpected character `{other}`"),
                        })
                    }
                }
            }
        }
        let start = start.ok_or_else(|| Error::InvalidEnvironment("layout has no `S`".into()))?;
        let goal = goal.ok_or_else(|| Error::InvalidEnvironment("layout has no `G`".into()))?;
        Self::with_start(width, rows.len(), &walls, start, goal)
    }

    pub fn with_max_episode_steps(mut self, cap: usize) -> Self {
        self.max_episode_steps = cap.max(1);
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_of(&self, state: usize) -> Cell {
        Cell {
            x: state % self.width,
            y: state / self.width,
        }
    }

    pub fn is_wall(&self, state: usize) -> bool {
        self.walls[state]
    }

    fn neighbor(&self, state: usize, action: ActionId) -> usize {
        let Cell { x, y } = self.cell_of(state);
        let (nx, ny) = match action {
            UP if y > 0 => (x, y - 1),
            DOWN if y + 1 < self.height => (x, y + 1),
            LEFT if x > 0 => (x - 1, y),
            RIGHT if x + 1 < self.width => (x + 1, y),
            _ => (x, y),
        };
        let next = ny * self.width + nx;
        if self.walls[next] {
            state
        } else {
            next
        }
    }

    fn reachable_from_start(&self) -> Vec<bool> {
        let mut seen = vec![false; self.walls.len()];
        let mut queue = VecDeque::from([self.start]);
        seen[self.start] = true;
        while let Some(s) = queue.pop_front() {
            for a in 0..4 {
                let n = self.neighbor(s, a);
                if !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
        seen
    }
}

impl Environment for Gridworld {
    fn action_count(&self) -> usize {
        4
    }

    fn action_labels(&self) -> Vec<String> {
        ["up", "down", "left", "right"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    fn max_episode_steps(&self) -> usize {
        self.max_episode_steps
    }

    fn state_count(&self) -> usize {
        self.width * self.height
    }

    fn feature_len(&self) -> usize {
        self.width * self.height
    }

    fn reset(&mut self, _seed: u64) -> Observation {
        self.position = self.start;
        self.clock.reset();
        self.observation_of(self.start)
    }

    fn step(&mut self, action: ActionId) -> Result<StepOutcome> {
        self.clock.check(action, 4)?;
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
        Some(1.0)
    }
}

impl TabularModel for Gridworld {
    fn states(&self) -> Vec<usize> {
        (0..self.walls.len()).filter(|&s| !self.walls[s]).collect()
    }

    fn start_state(&self) -> usize {
        self.start
    }

    fn is_terminal_state(&self, state: usize) -> bool {
        state == self.goal
    }

    fn model_step(&self, state: usize, action: ActionId) -> (usize, f64, bool) {
        let next = self.neighbor(state, action);
        let terminal = next == self.goal;
        (next, if terminal { 1.0 } else { 0.0 }, terminal)
    }

    fn observation_of(&self, state: usize) -> Observation {
        Observation::one_hot(state, self.walls.len())
    }

    fn reset_to(&mut self, state: usize) -> Result<Observation> {
        if state >= self.walls.len() || self.walls[state] {
            return Err(Error::InvalidArgument(format!(
                "state {state} is not a floor cell"
            )));
        }
        self.position = state;
        self.clock.reset();
        self.clock.done = state == self.goal;
        Ok(self.observation_of(state))
    }
}
