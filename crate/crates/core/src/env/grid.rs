use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{
    EnvError, EnvState, Environment, Featurizer, StepResult, DEFAULT_STEP_PENALTY, GOAL_REWARD,
};

/// Row/column offsets for up, right, down, left.
const MOVES: [(isize, isize); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];

/// A rectangular map: `#` wall, `S` start, `G` goal, `.` empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub walls: Vec<bool>,
    pub start: usize,
    pub goal: usize,
}

impl GridSpec {
    pub fn parse(text: &str) -> Result<Self, EnvError> {
        let rows: Vec<&str> = text
            .lines()
            .map(str::trim_end)
            .filter(|l| !l.is_empty())
            .collect();
        let bad = |msg: String| Err(EnvError::MalformedGrid(msg));
        if rows.is_empty() {
            return bad(String::from("no rows"));
        }
        let width = rows[0].chars().count();
        let mut walls = Vec::new();
        let (mut start, mut goal) = (None, None);
        for (r, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return bad(format!(
                    "row {r} has {} cells, expected {width}",
                    row.chars().count()
                ));
            }
            for (c, ch) in row.chars().enumerate() {
                let cell = r * width + c;
                match ch {
                    '#' => walls.push(true),
                    '.' => walls.push(false),
                    'S' if start.is_none() => {
                        start = Some(cell);
                        walls.push(false);
                    }
                    'G' if goal.is_none() => {
                        goal = Some(cell);
                        walls.push(false);
                    }
                    'S' | 'G' => return bad(format!("duplicate '{ch}'")),
                    other => return bad(format!("unexpected character '{other}'")),
                }
            }
        }
        let (Some(start), Some(goal)) = (start, goal) else {
            return bad(String::from("map needs exactly one S and one G"));
        };
        if start == goal {
            return bad(String::from("start equals goal"));
        }
        Ok(GridSpec {
            width,
            height: rows.len(),
            walls,
            start,
            goal,
        })
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    /// The map as `parse` accepts it, one row per line.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.area() + self.height);
        for cell in 0..self.area() {
            if cell > 0 && cell % self.width == 0 {
                out.push('\n');
            }
            out.push(match cell {
                c if c == self.start => 'S',
                c if c == self.goal => 'G',
                c if self.walls[c] => '#',
                _ => '.',
            });
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridWorld {
    spec: GridSpec,
    step_penalty: f64,
}

impl GridWorld {
    pub fn new(spec: GridSpec) -> Self {
        GridWorld {
            spec,
            step_penalty: DEFAULT_STEP_PENALTY,
        }
    }

    pub fn with_step_penalty(mut self, penalty: f64) -> Self {
        self.step_penalty = penalty;
        self
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    fn state(&self, cell: usize) -> EnvState {
        EnvState {
            key: cell as u64,
            terminal: cell == self.spec.goal,
        }
    }
}

impl Environment for GridWorld {
    fn reset(&self) -> EnvState {
        self.state(self.spec.start)
    }

    fn step(&self, state: &EnvState, action: usize) -> Result<StepResult, EnvError> {
        if state.terminal {
            return Err(EnvError::Terminal);
        }
        let &(dr, dc) = MOVES.get(action).ok_or(EnvError::InvalidAction(action))?;
        let cell = state.key as usize;
        let (r, c) = (
            (cell / self.spec.width) as isize,
            (cell % self.spec.width) as isize,
        );
        let (nr, nc) = (r + dr, c + dc);
        let inside = nr >= 0
            && nc >= 0
            && (nr as usize) < self.spec.height
            && (nc as usize) < self.spec.width;
        let mut next = cell;
        if inside {
            let candidate = nr as usize * self.spec.width + nc as usize;
            if !self.spec.walls[candidate] {
                next = candidate;
            }
        }
        let next_state = self.state(next);
        Ok(StepResult {
            next_state,
            reward: if next_state.terminal {
                GOAL_REWARD
            } else {
                self.step_penalty
            },
            done: next_state.terminal,
        })
    }

    fn action_count(&self) -> usize {
        MOVES.len()
    }

    fn max_episode_steps(&self) -> usize {
        4 * self.spec.area()
    }

    fn featurizer(&self) -> Featurizer {
        Featurizer::Grid {
            width: self.spec.width,
            height: self.spec.height,
        }
    }
}
