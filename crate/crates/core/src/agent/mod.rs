//! Double-Q learner over a growable action set.

mod abandon;
mod estimator;

use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

use crate::actions::{ActionId, ActionSet};
use crate::env::{EnvError, EnvState, Environment};
use crate::grammar::MacroAction;
use crate::replay::{Decision, Experience, ReplayBuffer, ReplayError, Transition};

pub use abandon::{divergence, AbandonShipTracker};
pub use estimator::{LinearQ, TabularQ, ValueEstimator};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("action set is empty")]
    EmptyActionSet,
    #[error("unknown action {0}")]
    UnknownAction(ActionId),
    #[error("macro starts with unknown primitive {0}")]
    UnknownPrimitive(usize),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// One Double-Q sweep over `batch`.
///
/// Targets are computed before any value moves: the online estimator picks
/// the next action, the frozen one scores it, and the bootstrap is discounted
/// by `gamma^n_steps` so macro experiences are treated as n-step returns.
pub fn q_update(
    online: &mut ValueEstimator,
    target: &ValueEstimator,
    batch: &[Experience],
    gamma: f64,
    alpha: f64,
) {
    let targets: Vec<f64> = batch
        .iter()
        .map(|e| {
            if e.done {
                e.reward
            } else {
                let next = argmax(&online.values(&e.next_state));
                e.reward + libm::pow(gamma, e.n_steps as f64) * target.value(&e.next_state, next)
            }
        })
        .collect();
    for (e, y) in batch.iter().zip(targets) {
        online.update_toward(&e.state, e.action, y, alpha);
    }
}

/// A uniformly random action where every macro weighs `bonus` and every primitive 1.
pub fn random_action<R: Rng + ?Sized>(actions: &ActionSet, bonus: f64, rng: &mut R) -> ActionId {
    let primitives = actions.primitive_count() as f64;
    let total = primitives + bonus * actions.macro_count() as f64;
    let u = rng.gen::<f64>() * total;
    if u < primitives || actions.macro_count() == 0 {
        (u as usize).min(actions.primitive_count() - 1)
    } else {
        let i = ((u - primitives) / bonus) as usize;
        actions.primitive_count() + i.min(actions.macro_count() - 1)
    }
}

/// Epsilon-greedy choice. Returns the action and whether it was exploratory.
pub fn pick_action<R: Rng + ?Sized>(
    estimator: &ValueEstimator,
    state: &EnvState,
    actions: &ActionSet,
    epsilon: f64,
    bonus: f64,
    rng: &mut R,
) -> Result<(ActionId, bool), AgentError> {
    if actions.is_empty() {
        return Err(AgentError::EmptyActionSet);
    }
    if rng.gen::<f64>() < epsilon {
        Ok((random_action(actions, bonus, rng), true))
    } else {
        let values = estimator.values(state);
        Ok((argmax(&values[..actions.len()]), false))
    }
}

/// Plays `action` from `state`, one primitive at a time.
///
/// Before every primitive after the first, a macro consults `tracker` (when
/// given) and stops if continuing looks much worse than the best primitive.
/// Execution also stops at episode termination or after `budget` primitives.
pub fn execute_action<E: Environment + ?Sized>(
    env: &E,
    state: EnvState,
    action: ActionId,
    actions: &ActionSet,
    estimator: &ValueEstimator,
    mut tracker: Option<&mut AbandonShipTracker>,
    budget: usize,
) -> Result<(Decision, EnvState), AgentError> {
    let plan = actions
        .primitives(action)
        .ok_or(AgentError::UnknownAction(action))?;
    let primitives = actions.primitive_count();
    let mut s = state;
    let mut steps = Vec::with_capacity(plan.len());
    let mut abandoned = false;
    for (i, &p) in plan.iter().enumerate() {
        if steps.len() >= budget {
            break;
        }
        if i > 0 {
            if let Some(t) = tracker.as_deref_mut() {
                let q = estimator.values(&s);
                let q_highest = q[..primitives]
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max);
                if t.abandon_check(q[p], q_highest) {
                    abandoned = true;
                    break;
                }
            }
        }
        let r = env.step(&s, p)?;
        steps.push(Transition {
            state: s,
            action: p,
            reward: r.reward,
            next_state: r.next_state,
            done: r.done,
        });
        s = r.next_state;
        if r.done {
            break;
        }
    }
    let attempted = if abandoned { plan.len() } else { steps.len() };
    Ok((
        Decision {
            action,
            steps,
            attempted,
            abandoned,
        },
        s,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentParams {
    pub gamma: f64,
    pub alpha: f64,
    pub batch_size: usize,
    pub target_refresh: u64,
    pub exploration_bonus: f64,
    /// `None` disables Abandon Ship.
    pub abandon_z: Option<f64>,
    /// Initialise new macro outputs from their first primitive.
    pub transfer: bool,
}

impl Default for AgentParams {
    fn default() -> Self {
        AgentParams {
            gamma: 0.99,
            alpha: 0.5,
            batch_size: 32,
            target_refresh: 200,
            exploration_bonus: 4.0,
            abandon_z: Some(1.0),
            transfer: true,
        }
    }
}

/// Online and frozen estimators, the action set and the abandon tracker of one run.
#[derive(Debug, Clone)]
pub struct Agent {
    params: AgentParams,
    online: ValueEstimator,
    target: ValueEstimator,
    actions: ActionSet,
    tracker: Option<AbandonShipTracker>,
    updates: u64,
}

impl Agent {
    pub fn new(params: AgentParams, estimator: ValueEstimator) -> Self {
        let actions = ActionSet::new(estimator.action_count());
        let tracker = params.abandon_z.map(AbandonShipTracker::new);
        Agent {
            params,
            target: estimator.clone(),
            online: estimator,
            actions,
            tracker,
            updates: 0,
        }
    }

    pub fn params(&self) -> &AgentParams {
        &self.params
    }

    pub fn actions(&self) -> &ActionSet {
        &self.actions
    }

    pub fn estimator(&self) -> &ValueEstimator {
        &self.online
    }

    pub fn target_estimator(&self) -> &ValueEstimator {
        &self.target
    }

    pub fn tracker(&self) -> Option<&AbandonShipTracker> {
        self.tracker.as_ref()
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn act<R: Rng + ?Sized>(
        &self,
        state: &EnvState,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<(ActionId, bool), AgentError> {
        pick_action(
            &self.online,
            state,
            &self.actions,
            epsilon,
            self.params.exploration_bonus,
            rng,
        )
    }

    /// Runs a decision; exploratory macros always roll out fully.
    pub fn execute<E: Environment + ?Sized>(
        &mut self,
        env: &E,
        state: EnvState,
        action: ActionId,
        explored: bool,
        budget: usize,
    ) -> Result<Decision, AgentError> {
        let tracker = if explored {
            None
        } else {
            self.tracker.as_mut()
        };
        execute_action(
            env,
            state,
            action,
            &self.actions,
            &self.online,
            tracker,
            budget,
        )
        .map(|(d, _)| d)
    }

    /// One learning step from `buffer`; returns false if there was nothing to sample.
    pub fn learn<R: Rng + ?Sized>(
        &mut self,
        buffer: &ReplayBuffer,
        rng: &mut R,
    ) -> Result<bool, AgentError> {
        let batch = match buffer.sample(rng, self.params.batch_size) {
            Ok(batch) => batch,
            Err(ReplayError::Empty) => return Ok(false),
            Err(e) => return Err(e.into()),
        };
        q_update(
            &mut self.online,
            &self.target,
            &batch,
            self.params.gamma,
            self.params.alpha,
        );
        self.updates += 1;
        if self
            .updates
            .is_multiple_of(self.params.target_refresh.max(1))
        {
            self.target = self.online.clone();
        }
        Ok(true)
    }

    /// Appends the novel macros and grows both estimators; returns the new ids.
    pub fn add_macros(
        &mut self,
        macros: impl IntoIterator<Item = MacroAction>,
    ) -> Result<Vec<ActionId>, AgentError> {
        let added = self.actions.extend(macros);
        let firsts: Vec<usize> = added
            .iter()
            .map(|&id| self.actions.macro_action(id).expect("just added").first())
            .collect();
        self.online
            .expand_action_head(&firsts, self.params.transfer)?;
        self.target
            .expand_action_head(&firsts, self.params.transfer)?;
        Ok(added)
    }
}
