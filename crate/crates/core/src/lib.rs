//! Action-grammar reinforcement learning without the standard library.
//!
//! An off-policy agent periodically compresses its own best no-exploration
//! behaviour with a grammar calculator (Sequitur, k-Sequitur or an MDL
//! filtered Sequitur) and appends the resulting macro-actions to its action
//! set. Experiences are re-imagined through hindsight action replay, sampled
//! from an action-balanced buffer, and macros can be abandoned mid-flight when
//! continuing looks much worse than the best primitive.
//!
//! Everything here is a pure function of its inputs and an explicit seeded
//! RNG; IO, configuration files and the CLI live in the `actiongram` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod actions;
pub mod agent;
pub mod env;
pub mod grammar;
pub mod orchestrator;
pub mod replay;

pub use actions::{ActionId, ActionSet};
pub use agent::{AbandonShipTracker, Agent, ValueEstimator};
pub use env::{Env, EnvError, EnvState, Environment, GridSpec, GridWorld, Hanoi, StepResult};
pub use grammar::{Calculator, Grammar, GrammarError, MacroAction, Symbol};
pub use orchestrator::{run, ConfigError, EnvSpec, RunConfig, RunError, RunMetrics, Runner};
pub use replay::{EpisodeTrace, Experience, ReplayBuffer};
