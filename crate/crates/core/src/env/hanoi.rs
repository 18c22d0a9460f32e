use alloc::vec::Vec;

use super::{
    EnvError, EnvState, Environment, Featurizer, StepResult, DEFAULT_STEP_PENALTY, GOAL_REWARD,
};

/// Ordered (from, to) rod pairs; action ids 0..6 read as the letters a..f.
pub const MOVES: [(usize, usize); 6] = [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)];

const GOAL_ROD: u64 = 2;

/// Towers of Hanoi with every disk starting on rod 0 and the goal on rod 2.
///
/// The state key stores the rod of disk `i` (0 = smallest) as base-3 digit `i`.
/// Illegal moves leave the state unchanged and still cost the step penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct Hanoi {
    disks: usize,
    step_penalty: f64,
    max_steps: usize,
}

impl Hanoi {
    pub const DEFAULT_MAX_STEPS: usize = 500;

    pub fn new(disks: usize) -> Result<Self, EnvError> {
        if !(2..=8).contains(&disks) {
            return Err(EnvError::DiskCount(disks));
        }
        Ok(Hanoi {
            disks,
            step_penalty: DEFAULT_STEP_PENALTY,
            max_steps: Self::DEFAULT_MAX_STEPS,
        })
    }

    pub fn with_step_penalty(mut self, penalty: f64) -> Self {
        self.step_penalty = penalty;
        self
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn disks(&self) -> usize {
        self.disks
    }

    fn rod_of(&self, key: u64, disk: usize) -> u64 {
        (key / 3u64.pow(disk as u32)) % 3
    }

    /// Disk sizes on each rod, bottom to top (largest disk is `disks`).
    pub fn rods(&self, state: &EnvState) -> [Vec<usize>; 3] {
        let mut rods: [Vec<usize>; 3] = Default::default();
        for disk in (0..self.disks).rev() {
            rods[self.rod_of(state.key, disk) as usize].push(disk + 1);
        }
        rods
    }

    fn top(&self, key: u64, rod: u64) -> Option<usize> {
        (0..self.disks).find(|&d| self.rod_of(key, d) == rod)
    }

    fn solved_key(&self) -> u64 {
        (0..self.disks).map(|d| GOAL_ROD * 3u64.pow(d as u32)).sum()
    }
}

impl Environment for Hanoi {
    fn reset(&self) -> EnvState {
        EnvState {
            key: 0,
            terminal: false,
        }
    }

    fn step(&self, state: &EnvState, action: usize) -> Result<StepResult, EnvError> {
        if state.terminal {
            return Err(EnvError::Terminal);
        }
        let &(from, to) = MOVES.get(action).ok_or(EnvError::InvalidAction(action))?;
        let (from, to) = (from as u64, to as u64);
        let mut key = state.key;
        if let Some(disk) = self.top(key, from) {
            let legal = self.top(key, to).is_none_or(|other| other > disk);
            if legal {
                let place = 3u64.pow(disk as u32);
                key = key - from * place + to * place;
            }
        }
        let done = key == self.solved_key();
        Ok(StepResult {
            next_state: EnvState {
                key,
                terminal: done,
            },
            reward: if done { GOAL_REWARD } else { self.step_penalty },
            done,
        })
    }

    fn action_count(&self) -> usize {
        MOVES.len()
    }

    fn max_episode_steps(&self) -> usize {
        self.max_steps
    }

    fn featurizer(&self) -> Featurizer {
        Featurizer::Hanoi { disks: self.disks }
    }
}
