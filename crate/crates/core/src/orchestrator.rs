//! The outer loop: gather experience, periodically infer an action grammar
//! from the best no-exploration episodes, and grow the action set.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_pcg::Pcg64;
use thiserror::Error;

use crate::actions::ActionId;
use crate::agent::{Agent, AgentError, AgentParams, ValueEstimator};
use crate::env::{
    Env, EnvError, EnvState, Environment, GridSpec, GridWorld, Hanoi, DEFAULT_STEP_PENALTY,
};
use crate::grammar::{Calculator, Grammar, GrammarError};
use crate::replay::{
    as_played, har_expand, BalancedBuffer, EpisodeTrace, ReplayBuffer, UniformBuffer,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EnvSpec {
    Hanoi { disks: usize },
    Grid(GridSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Tabular,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplayKind {
    Balanced,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{0} must be positive")]
    NotPositive(&'static str),
    #[error("{field} = {value} is outside {range}")]
    OutOfRange {
        field: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("k-sequitur needs k >= 2, got {0}")]
    InvalidK(usize),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
}

impl From<crate::replay::ReplayError> for RunError {
    fn from(e: crate::replay::ReplayError) -> Self {
        RunError::Agent(e.into())
    }
}

/// Every parameter of one seeded run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvSpec,
    pub step_penalty: f64,
    pub estimator: EstimatorKind,
    pub gamma: f64,
    pub alpha: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Primitive steps over which epsilon falls linearly after the random phase.
    pub epsilon_decay_steps: u64,
    pub batch_size: usize,
    pub target_refresh: u64,
    pub initial_random_steps: u64,
    pub replay_capacity: usize,
    /// Number of identify phases; 0 gives the bare base agent.
    pub grammar_iterations: usize,
    pub steps_before_grammar: u64,
    /// Every `eval_period`-th episode runs without exploration.
    pub eval_period: u64,
    /// How many recent no-exploration traces are kept as grammar evidence.
    pub evaluation_episodes: usize,
    pub abandon_z: Option<f64>,
    pub exploration_bonus: f64,
    pub calculator: Calculator,
    pub replay: ReplayKind,
    pub har: bool,
    pub transfer: bool,
    pub post_inference_random_steps: u64,
    pub seed: u64,
    pub total_steps: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            env: EnvSpec::Hanoi { disks: 3 },
            step_penalty: DEFAULT_STEP_PENALTY,
            estimator: EstimatorKind::Tabular,
            gamma: 0.99,
            alpha: 0.5,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 10_000,
            batch_size: 32,
            target_refresh: 200,
            initial_random_steps: 1_000,
            replay_capacity: 50_000,
            grammar_iterations: 1,
            steps_before_grammar: 5_000,
            eval_period: 10,
            evaluation_episodes: 5,
            abandon_z: Some(1.0),
            exploration_bonus: 4.0,
            calculator: Calculator::Sequitur,
            replay: ReplayKind::Balanced,
            har: true,
            transfer: true,
            post_inference_random_steps: 500,
            seed: 0,
            total_steps: 20_000,
        }
    }
}

fn in_range(
    field: &'static str,
    value: f64,
    lo: f64,
    hi: f64,
    range: &'static str,
) -> Result<(), ConfigError> {
    if value >= lo && value <= hi {
        Ok(())
    } else {
        Err(ConfigError::OutOfRange {
            field,
            value,
            range,
        })
    }
}

impl RunConfig {
    /// The same configuration with grammar inference switched off.
    pub fn base_agent(&self) -> Self {
        RunConfig {
            grammar_iterations: 0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let counts: [(&'static str, u64); 7] = [
            ("total_steps", self.total_steps),
            ("batch_size", self.batch_size as u64),
            ("target_refresh", self.target_refresh),
            ("replay_capacity", self.replay_capacity as u64),
            ("steps_before_grammar", self.steps_before_grammar),
            ("eval_period", self.eval_period),
            ("evaluation_episodes", self.evaluation_episodes as u64),
        ];
        if let Some(&(name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(ConfigError::NotPositive(name));
        }
        in_range("gamma", self.gamma, 0.0, 1.0, "[0, 1]")?;
        in_range("epsilon_start", self.epsilon_start, 0.0, 1.0, "[0, 1]")?;
        in_range("epsilon_end", self.epsilon_end, 0.0, 1.0, "[0, 1]")?;
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(ConfigError::OutOfRange {
                field: "alpha",
                value: self.alpha,
                range: "(0, 1]",
            });
        }
        in_range(
            "exploration_bonus",
            self.exploration_bonus,
            1.0,
            f64::MAX,
            "[1, inf)",
        )?;
        in_range(
            "step_penalty",
            self.step_penalty,
            f64::MIN,
            f64::MAX,
            "finite values",
        )?;
        if let Some(z) = self.abandon_z {
            in_range("abandon_z", z, f64::MIN, f64::MAX, "finite values")?;
        }
        if let Calculator::KSequitur(k) = self.calculator {
            if k < 2 {
                return Err(ConfigError::InvalidK(k));
            }
        }
        self.build_env().map(|_| ())
    }

    pub fn build_env(&self) -> Result<Env, ConfigError> {
        Ok(match &self.env {
            EnvSpec::Hanoi { disks } => {
                Env::Hanoi(Hanoi::new(*disks)?.with_step_penalty(self.step_penalty))
            }
            EnvSpec::Grid(spec) => {
                Env::Grid(GridWorld::new(spec.clone()).with_step_penalty(self.step_penalty))
            }
        })
    }

    pub fn agent_params(&self) -> AgentParams {
        AgentParams {
            gamma: self.gamma,
            alpha: self.alpha,
            batch_size: self.batch_size,
            target_refresh: self.target_refresh,
            exploration_bonus: self.exploration_bonus,
            abandon_z: self.abandon_z,
            transfer: self.transfer,
        }
    }
}

/// One row per episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: u64,
    pub evaluation: bool,
    /// Cumulative primitive steps when the episode ended.
    pub end_step: u64,
    pub epsilon: f64,
    pub total_return: f64,
    pub length: usize,
    pub solved: bool,
    pub decisions: usize,
    pub macro_decisions: usize,
    pub abandoned: usize,
    /// Primitives the macro decisions would have run without abandonment.
    pub macro_attempted: usize,
    pub macro_executed: usize,
    pub action_count: usize,
    pub stored_experiences: usize,
}

/// One row per no-exploration episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRecord {
    pub episode: u64,
    pub end_step: u64,
    pub score: f64,
    pub length: usize,
    pub solved: bool,
    pub macro_decisions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrammarSnapshot {
    pub iteration: usize,
    pub step: u64,
    pub episode: u64,
    pub calculator: Calculator,
    pub selected_episodes: usize,
    pub grammar: String,
    pub added: Vec<(ActionId, Vec<usize>)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunMetrics {
    pub episodes: Vec<EpisodeRecord>,
    pub evaluations: Vec<EvaluationRecord>,
    pub grammars: Vec<GrammarSnapshot>,
    pub warnings: Vec<String>,
    pub total_steps: u64,
    /// Filled in by callers that can read a clock.
    pub wall_clock_secs: Option<f64>,
}

impl RunMetrics {
    /// Step count at the end of the first no-exploration episode that
    /// reached the goal.
    pub fn first_solve_step(&self) -> Option<u64> {
        self.evaluations
            .iter()
            .find(|e| e.solved)
            .map(|e| e.end_step)
    }

    /// Step count at the end of the first no-exploration episode that solved
    /// in at most `moves` primitive steps.
    pub fn first_solve_within(&self, moves: usize) -> Option<u64> {
        self.evaluations
            .iter()
            .find(|e| e.solved && e.length <= moves)
            .map(|e| e.end_step)
    }

    pub fn final_score(&self) -> Option<f64> {
        self.evaluations.last().map(|e| e.score)
    }

    /// Executed over attempted primitive count of all macro decisions.
    pub fn move_length_ratio(&self) -> Option<f64> {
        let attempted: usize = self.episodes.iter().map(|e| e.macro_attempted).sum();
        let executed: usize = self.episodes.iter().map(|e| e.macro_executed).sum();
        (attempted > 0).then(|| executed as f64 / attempted as f64)
    }
}

/// Indices of the episodes in the top 20% of `traces` by return (at least
/// one), best first; equal returns keep their original order.
pub fn extract_best_episodes(traces: &[EpisodeTrace]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..traces.len()).collect();
    order.sort_by(|&a, &b| {
        traces[b]
            .total_return()
            .total_cmp(&traces[a].total_return())
    });
    order.truncate((traces.len() / 5).max(1).min(traces.len()));
    order
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifyOutcome {
    pub selected: Vec<usize>,
    pub grammar: Grammar,
    pub added: Vec<ActionId>,
}

/// Infers a grammar over the best traces of `traces` and appends its novel
/// macros to the agent. Returns `None` when there is no evidence.
pub fn identify_action_grammar(
    traces: &[EpisodeTrace],
    calculator: Calculator,
    agent: &mut Agent,
) -> Result<Option<IdentifyOutcome>, RunError> {
    if traces.is_empty() {
        return Ok(None);
    }
    let selected = extract_best_episodes(traces);
    let sequences: Vec<Vec<usize>> = selected
        .iter()
        .map(|&i| traces[i].primitive_actions())
        .collect();
    let views: Vec<&[usize]> = sequences.iter().map(Vec::as_slice).collect();
    let grammar = calculator.infer_episodes(&views, agent.actions().primitive_count())?;
    let added = agent.add_macros(grammar.extract_macros())?;
    Ok(Some(IdentifyOutcome {
        selected,
        grammar,
        added,
    }))
}

/// State of one run in progress.
#[derive(Debug, Clone)]
pub struct Runner {
    config: RunConfig,
    env: Env,
    agent: Agent,
    buffer: ReplayBuffer,
    rng: Pcg64,
    steps: u64,
    episodes: u64,
    forced_random_until: u64,
    metrics: RunMetrics,
}

impl Runner {
    pub fn new(config: RunConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let env = config.build_env()?;
        let actions = env.action_count();
        let estimator = match config.estimator {
            EstimatorKind::Tabular => ValueEstimator::tabular(actions),
            EstimatorKind::Linear => ValueEstimator::linear(env.featurizer(), actions),
        };
        let buffer = match config.replay {
            ReplayKind::Balanced => {
                ReplayBuffer::Balanced(BalancedBuffer::new(config.replay_capacity, actions))
            }
            ReplayKind::Uniform => {
                ReplayBuffer::Uniform(UniformBuffer::new(config.replay_capacity))
            }
        };
        Ok(Runner {
            agent: Agent::new(config.agent_params(), estimator),
            rng: Pcg64::seed_from_u64(config.seed),
            config,
            env,
            buffer,
            steps: 0,
            episodes: 0,
            forced_random_until: 0,
            metrics: RunMetrics::default(),
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn env(&self) -> &Env {
        &self.env
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn metrics(&self) -> &RunMetrics {
        &self.metrics
    }

    pub fn into_metrics(self) -> RunMetrics {
        self.metrics
    }

    /// Exploration rate for the next decision of a regular episode.
    pub fn epsilon(&self) -> f64 {
        let c = &self.config;
        if self.steps < c.initial_random_steps || self.steps < self.forced_random_until {
            return 1.0;
        }
        let t = (self.steps - c.initial_random_steps) as f64;
        let span = c.epsilon_decay_steps.max(1) as f64;
        let frac = (t / span).min(1.0);
        c.epsilon_start + (c.epsilon_end - c.epsilon_start) * frac
    }

    /// Whether the next episode is a no-exploration one.
    pub fn next_is_evaluation(&self) -> bool {
        (self.episodes + 1).is_multiple_of(self.config.eval_period)
    }

    /// Plays one episode, learning along the way, then stores its experiences.
    pub fn play_episode(&mut self, evaluation: bool) -> Result<EpisodeTrace, RunError> {
        let cap = self.env.max_episode_steps();
        let total = self.config.total_steps;
        let epsilon_at_start = if evaluation { 0.0 } else { self.epsilon() };
        let mut trace = EpisodeTrace::default();
        let mut state: EnvState = self.env.reset();
        let mut length = 0usize;
        while !state.terminal && length < cap && self.steps < total {
            let epsilon = if evaluation { 0.0 } else { self.epsilon() };
            let (action, explored) = self.agent.act(&state, epsilon, &mut self.rng)?;
            let budget = (cap - length).min((total - self.steps) as usize);
            let decision = self
                .agent
                .execute(&self.env, state, action, explored, budget)?;
            let n = decision.executed();
            if let Some(last) = decision.steps.last() {
                state = last.next_state;
            }
            for i in 0..n as u64 {
                if self.steps + i >= self.config.initial_random_steps {
                    self.agent.learn(&self.buffer, &mut self.rng)?;
                }
            }
            self.steps += n as u64;
            length += n;
            trace.decisions.push(decision);
        }
        let experiences = if self.config.har {
            har_expand(&trace, self.agent.actions())?
        } else {
            as_played(&trace, self.agent.actions())?
        };
        let stored = experiences.len();
        self.buffer.add_all(experiences);
        self.record(&trace, evaluation, epsilon_at_start, stored);
        self.episodes += 1;
        Ok(trace)
    }

    fn record(&mut self, trace: &EpisodeTrace, evaluation: bool, epsilon: f64, stored: usize) {
        let actions = self.agent.actions();
        let macros: Vec<_> = trace
            .decisions
            .iter()
            .filter(|d| actions.is_macro(d.action))
            .collect();
        let row = EpisodeRecord {
            episode: self.episodes,
            evaluation,
            end_step: self.steps,
            epsilon,
            total_return: trace.total_return(),
            length: trace.primitive_len(),
            solved: trace.solved(),
            decisions: trace.decisions.len(),
            macro_decisions: macros.len(),
            abandoned: macros.iter().filter(|d| d.abandoned).count(),
            macro_attempted: macros.iter().map(|d| d.attempted).sum(),
            macro_executed: macros.iter().map(|d| d.executed()).sum(),
            action_count: actions.len(),
            stored_experiences: stored,
        };
        if evaluation {
            self.metrics.evaluations.push(EvaluationRecord {
                episode: row.episode,
                end_step: row.end_step,
                score: row.total_return,
                length: row.length,
                solved: row.solved,
                macro_decisions: row.macro_decisions,
            });
        }
        self.metrics.episodes.push(row);
        self.metrics.total_steps = self.steps;
    }

    /// Runs episodes until `until` primitive steps (or the run's total) have
    /// elapsed. No-exploration traces are appended to `evidence`, which keeps
    /// only the most recent `evaluation_episodes` of them.
    pub fn gather_experience(
        &mut self,
        evidence: &mut Vec<EpisodeTrace>,
        until: u64,
    ) -> Result<(), RunError> {
        let until = until.min(self.config.total_steps);
        while self.steps < until {
            let evaluation = self.next_is_evaluation();
            let trace = self.play_episode(evaluation)?;
            if evaluation {
                evidence.push(trace);
                if evidence.len() > self.config.evaluation_episodes {
                    evidence.remove(0);
                }
            }
        }
        Ok(())
    }

    /// One identify phase followed by the forced-random window. Without
    /// evidence the phase is skipped with a warning and nothing changes.
    pub fn identify(
        &mut self,
        evidence: &[EpisodeTrace],
        iteration: usize,
    ) -> Result<(), RunError> {
        match identify_action_grammar(evidence, self.config.calculator, &mut self.agent)? {
            None => self.metrics.warnings.push(format!(
                "grammar iteration {iteration} at step {} skipped: no no-exploration episodes yet",
                self.steps
            )),
            Some(outcome) => {
                let actions = self.agent.actions();
                self.buffer.set_action_count(actions.len());
                let added = outcome
                    .added
                    .iter()
                    .map(|&id| (id, actions.primitives(id).unwrap_or_default()))
                    .collect();
                self.metrics.grammars.push(GrammarSnapshot {
                    iteration,
                    step: self.steps,
                    episode: self.episodes,
                    calculator: self.config.calculator,
                    selected_episodes: outcome.selected.len(),
                    grammar: outcome.grammar.to_text(),
                    added,
                });
                self.forced_random_until = self.steps + self.config.post_inference_random_steps;
            }
        }
        Ok(())
    }

    /// Alternates gathering and identifying until the step budget is spent.
    pub fn run_to_end(&mut self) -> Result<(), RunError> {
        let mut evidence = Vec::new();
        let mut iteration = 0;
        while self.steps < self.config.total_steps {
            if iteration < self.config.grammar_iterations {
                let boundary = self.config.steps_before_grammar * (iteration as u64 + 1);
                self.gather_experience(&mut evidence, boundary)?;
                if self.steps >= boundary {
                    self.identify(&evidence, iteration)?;
                    evidence.clear();
                    iteration += 1;
                }
            } else {
                self.gather_experience(&mut evidence, self.config.total_steps)?;
                evidence.clear();
            }
        }
        Ok(())
    }
}

/// Runs `config` from scratch; the result depends only on the config.
pub fn run(config: &RunConfig) -> Result<RunMetrics, RunError> {
    let mut runner = Runner::new(config.clone())?;
    runner.run_to_end()?;
    Ok(runner.into_metrics())
}
