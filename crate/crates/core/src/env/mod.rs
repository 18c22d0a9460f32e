//! Deterministic discrete-action episodic environments.

mod grid;
mod hanoi;

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

pub use grid::{GridSpec, GridWorld};
pub use hanoi::Hanoi;

pub const DEFAULT_STEP_PENALTY: f64 = -1.0;
pub const GOAL_REWARD: f64 = 100.0;

/// Opaque state key plus terminal flag. Ordered so tabular learners can index it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EnvState {
    pub key: u64,
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub next_state: EnvState,
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("cannot step a terminal state")]
    Terminal,
    #[error("action {0} out of range")]
    InvalidAction(usize),
    #[error("disk count {0} outside 2..=8")]
    DiskCount(usize),
    #[error("malformed grid: {0}")]
    MalformedGrid(String),
}

/// Linear feature map of an environment's states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Featurizer {
    /// One indicator per (disk, rod) plus a bias.
    Hanoi { disks: usize },
    /// Row and column indicators plus a bias.
    Grid { width: usize, height: usize },
}

impl Featurizer {
    pub fn len(&self) -> usize {
        match *self {
            Featurizer::Hanoi { disks } => 3 * disks + 1,
            Featurizer::Grid { width, height } => width + height + 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn features(&self, state: &EnvState) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.len()];
        match *self {
            Featurizer::Hanoi { disks } => {
                let mut key = state.key;
                for disk in 0..disks {
                    out[3 * disk + (key % 3) as usize] = 1.0;
                    key /= 3;
                }
            }
            Featurizer::Grid { width, .. } => {
                let cell = state.key as usize;
                out[cell % width] = 1.0;
                out[width + cell / width] = 1.0;
            }
        }
        *out.last_mut().expect("bias slot") = 1.0;
        out
    }
}

pub trait Environment {
    fn reset(&self) -> EnvState;
    fn step(&self, state: &EnvState, action: usize) -> Result<StepResult, EnvError>;
    fn action_count(&self) -> usize;
    fn max_episode_steps(&self) -> usize;
    fn featurizer(&self) -> Featurizer;
}

/// Either built-in environment, selected at run time.
#[derive(Debug, Clone, PartialEq)]
pub enum Env {
    Hanoi(Hanoi),
    Grid(GridWorld),
}

impl Environment for Env {
    fn reset(&self) -> EnvState {
        match self {
            Env::Hanoi(e) => e.reset(),
            Env::Grid(e) => e.reset(),
        }
    }

    fn step(&self, state: &EnvState, action: usize) -> Result<StepResult, EnvError> {
        match self {
            Env::Hanoi(e) => e.step(state, action),
            Env::Grid(e) => e.step(state, action),
        }
    }

    fn action_count(&self) -> usize {
        match self {
            Env::Hanoi(e) => e.action_count(),
            Env::Grid(e) => e.action_count(),
        }
    }

    fn max_episode_steps(&self) -> usize {
        match self {
            Env::Hanoi(e) => e.max_episode_steps(),
            Env::Grid(e) => e.max_episode_steps(),
        }
    }

    fn featurizer(&self) -> Featurizer {
        match self {
            Env::Hanoi(e) => e.featurizer(),
            Env::Grid(e) => e.featurizer(),
        }
    }
}
