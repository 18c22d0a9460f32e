use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::actions::ActionId;
use crate::env::{EnvState, Featurizer};

use super::AgentError;

/// Action values keyed by state. Unseen states read the per-action defaults,
/// which start at zero and are copied along with a macro's first primitive.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularQ {
    rows: BTreeMap<EnvState, Vec<f64>>,
    defaults: Vec<f64>,
}

impl TabularQ {
    pub fn new(actions: usize) -> Self {
        TabularQ {
            rows: BTreeMap::new(),
            defaults: vec![0.0; actions],
        }
    }

    pub fn set(&mut self, state: &EnvState, action: ActionId, value: f64) {
        let defaults = &self.defaults;
        self.rows.entry(*state).or_insert_with(|| defaults.clone())[action] = value;
    }

    pub fn states(&self) -> impl Iterator<Item = &EnvState> {
        self.rows.keys()
    }
}

/// One weight vector per action over the environment's feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearQ {
    featurizer: Featurizer,
    weights: Vec<Vec<f64>>,
}

impl LinearQ {
    pub fn new(featurizer: Featurizer, actions: usize) -> Self {
        LinearQ {
            featurizer,
            weights: vec![vec![0.0; featurizer.len()]; actions],
        }
    }

    pub fn weights(&self, action: ActionId) -> &[f64] {
        &self.weights[action]
    }

    fn dot(w: &[f64], x: &[f64]) -> f64 {
        w.iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ValueEstimator {
    Tabular(TabularQ),
    Linear(LinearQ),
}

impl ValueEstimator {
    pub fn tabular(actions: usize) -> Self {
        ValueEstimator::Tabular(TabularQ::new(actions))
    }

    pub fn linear(featurizer: Featurizer, actions: usize) -> Self {
        ValueEstimator::Linear(LinearQ::new(featurizer, actions))
    }

    pub fn action_count(&self) -> usize {
        match self {
            ValueEstimator::Tabular(t) => t.defaults.len(),
            ValueEstimator::Linear(l) => l.weights.len(),
        }
    }

    /// Values of every action at `state`.
    pub fn values(&self, state: &EnvState) -> Vec<f64> {
        match self {
            ValueEstimator::Tabular(t) => t.rows.get(state).unwrap_or(&t.defaults).clone(),
            ValueEstimator::Linear(l) => {
                let x = l.featurizer.features(state);
                l.weights.iter().map(|w| LinearQ::dot(w, &x)).collect()
            }
        }
    }

    pub fn value(&self, state: &EnvState, action: ActionId) -> f64 {
        match self {
            ValueEstimator::Tabular(t) => t.rows.get(state).unwrap_or(&t.defaults)[action],
            ValueEstimator::Linear(l) => {
                LinearQ::dot(&l.weights[action], &l.featurizer.features(state))
            }
        }
    }

    /// Moves Q(state, action) a fraction `alpha` towards `target`. For the
    /// linear estimator this is one gradient step on the squared error.
    pub fn update_toward(&mut self, state: &EnvState, action: ActionId, target: f64, alpha: f64) {
        match self {
            ValueEstimator::Tabular(t) => {
                let defaults = &t.defaults;
                let row = t.rows.entry(*state).or_insert_with(|| defaults.clone());
                row[action] += alpha * (target - row[action]);
            }
            ValueEstimator::Linear(l) => {
                let x = l.featurizer.features(state);
                let w = &mut l.weights[action];
                let err = target - LinearQ::dot(w, &x);
                for (wi, xi) in w.iter_mut().zip(&x) {
                    *wi += alpha * err * xi;
                }
            }
        }
    }

    /// Adds one output per macro, in order. With `transfer` each new output
    /// copies the values of the macro's first primitive; otherwise it starts
    /// at zero. Existing outputs are untouched.
    pub fn expand_action_head(
        &mut self,
        firsts: &[usize],
        transfer: bool,
    ) -> Result<(), AgentError> {
        let before = self.action_count();
        if let Some(&bad) = firsts.iter().find(|&&p| p >= before) {
            return Err(AgentError::UnknownPrimitive(bad));
        }
        match self {
            ValueEstimator::Tabular(t) => {
                for &p in firsts {
                    let init = if transfer { t.defaults[p] } else { 0.0 };
                    t.defaults.push(init);
                    for row in t.rows.values_mut() {
                        let v = if transfer { row[p] } else { 0.0 };
                        row.push(v);
                    }
                }
            }
            ValueEstimator::Linear(l) => {
                for &p in firsts {
                    let w = if transfer {
                        l.weights[p].clone()
                    } else {
                        vec![0.0; l.featurizer.len()]
                    };
                    l.weights.push(w);
                }
            }
        }
        Ok(())
    }

    /// Flat text dump. Tabular: `action,state,value` per stored entry.
    /// Linear: `action,feature,weight`.
    pub fn snapshot(&self) -> String {
        let mut out = String::new();
        match self {
            ValueEstimator::Tabular(t) => {
                for (state, row) in &t.rows {
                    for (a, v) in row.iter().enumerate() {
                        let _ = writeln!(out, "{a},{},{v}", state.key);
                    }
                }
            }
            ValueEstimator::Linear(l) => {
                for (a, w) in l.weights.iter().enumerate() {
                    for (i, v) in w.iter().enumerate() {
                        let _ = writeln!(out, "{a},{i},{v}");
                    }
                }
            }
        }
        out
    }
}
