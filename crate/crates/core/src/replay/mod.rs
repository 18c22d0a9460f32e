//! Episode traces, hindsight action replay and replay storage.

mod buffer;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::actions::{ActionId, ActionSet};
use crate::env::EnvState;

pub use buffer::{sample_counts, BalancedBuffer, ReplayBuffer, UniformBuffer};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("trace uses action {0}, which is not in the action set")]
    UnknownAction(ActionId),
    #[error("replay buffer is empty")]
    Empty,
}

/// One stored transition. Macro experiences carry the undiscounted sum of
/// their primitive rewards and `n_steps` equal to the macro length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Experience {
    pub state: EnvState,
    pub action: ActionId,
    pub reward: f64,
    pub next_state: EnvState,
    pub done: bool,
    pub n_steps: usize,
}

impl Experience {
    /// `state,action,reward,next_state,done,n_steps`
    pub fn dump_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.state.key,
            self.action,
            self.reward,
            self.next_state.key,
            self.done as u8,
            self.n_steps
        )
    }
}

/// A single primitive environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: EnvState,
    pub action: usize,
    pub reward: f64,
    pub next_state: EnvState,
    pub done: bool,
}

impl Transition {
    fn experience(&self) -> Experience {
        Experience {
            state: self.state,
            action: self.action,
            reward: self.reward,
            next_state: self.next_state,
            done: self.done,
            n_steps: 1,
        }
    }
}

/// One policy decision and the primitive steps it actually produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub action: ActionId,
    pub steps: Vec<Transition>,
    /// Primitives the decision would have run had it not been abandoned.
    pub attempted: usize,
    pub abandoned: bool,
}

impl Decision {
    pub fn executed(&self) -> usize {
        self.steps.len()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeTrace {
    pub decisions: Vec<Decision>,
}

impl EpisodeTrace {
    pub fn transitions(&self) -> impl Iterator<Item = &Transition> {
        self.decisions.iter().flat_map(|d| d.steps.iter())
    }

    pub fn primitive_actions(&self) -> Vec<usize> {
        self.transitions().map(|t| t.action).collect()
    }

    pub fn primitive_len(&self) -> usize {
        self.decisions.iter().map(Decision::executed).sum()
    }

    pub fn total_return(&self) -> f64 {
        self.transitions().map(|t| t.reward).sum()
    }

    pub fn solved(&self) -> bool {
        self.transitions().last().is_some_and(|t| t.done)
    }
}

/// Every contiguous run of `stream` equal to one of `macros`.
///
/// Overlapping matches are all reported; results are ordered by offset and,
/// within an offset, longest macro first (ties by lower id).
pub fn match_macros(stream: &[usize], macros: &[(ActionId, &[usize])]) -> Vec<(usize, ActionId)> {
    let mut by_length: Vec<(ActionId, &[usize])> = macros.to_vec();
    by_length.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(&b.0)));
    let mut out = Vec::new();
    for offset in 0..stream.len() {
        for &(id, seq) in &by_length {
            if !seq.is_empty() && stream[offset..].starts_with(seq) {
                out.push((offset, id));
            }
        }
    }
    out
}

fn macro_experience(steps: &[Transition], id: ActionId) -> Experience {
    let first = &steps[0];
    let last = &steps[steps.len() - 1];
    Experience {
        state: first.state,
        action: id,
        reward: steps.iter().map(|t| t.reward).sum(),
        next_state: last.next_state,
        done: last.done,
        n_steps: steps.len(),
    }
}

fn validate(trace: &EpisodeTrace, actions: &ActionSet) -> Result<(), ReplayError> {
    match trace.decisions.iter().find(|d| !actions.contains(d.action)) {
        Some(d) => Err(ReplayError::UnknownAction(d.action)),
        None => Ok(()),
    }
}

/// Experiences exactly as played. A macro that ran to completion is stored as
/// one macro experience; an abandoned or truncated one only as its primitives.
pub fn as_played(
    trace: &EpisodeTrace,
    actions: &ActionSet,
) -> Result<Vec<Experience>, ReplayError> {
    validate(trace, actions)?;
    let mut out = Vec::new();
    for d in &trace.decisions {
        if actions.is_macro(d.action) && d.executed() == actions.length(d.action) {
            out.push(macro_experience(&d.steps, d.action));
        } else {
            out.extend(d.steps.iter().map(Transition::experience));
        }
    }
    Ok(out)
}

/// Hindsight action replay.
///
/// Returns every primitive step of the trace as a primitive experience, plus
/// one macro experience for each place the flattened primitive stream matches
/// a known macro. Completed macros that were actually played are among those
/// matches, so the as-played experiences are always included exactly once.
pub fn har_expand(
    trace: &EpisodeTrace,
    actions: &ActionSet,
) -> Result<Vec<Experience>, ReplayError> {
    validate(trace, actions)?;
    let steps: Vec<Transition> = trace.transitions().copied().collect();
    let stream: Vec<usize> = steps.iter().map(|t| t.action).collect();
    let macros: Vec<(ActionId, &[usize])> = actions
        .macros()
        .map(|(id, m)| (id, m.primitives.as_slice()))
        .collect();
    let matches = match_macros(&stream, &macros);

    let mut out = Vec::with_capacity(steps.len() + matches.len());
    let mut pending = matches.iter().peekable();
    for (offset, step) in steps.iter().enumerate() {
        out.push(step.experience());
        while let Some(&&(at, id)) = pending.peek() {
            if at != offset {
                break;
            }
            out.push(macro_experience(&steps[at..at + actions.length(id)], id));
            pending.next();
        }
    }
    Ok(out)
}
