//! Experiment spec files.
//!
//! The format is flat `key = value` lines grouped under `[section]` headers;
//! `#` starts a comment line. An `[experiment]` section holds the seed list
//! and output settings, `[run]` holds the shared run parameters, and each
//! `[variant <label>]` section overrides some of them:
//!
//! ```text
//! [experiment]
//! seeds = 0, 1, 2
//! output = results
//!
//! [run]
//! env = hanoi
//! disks = 3
//! total_steps = 20000
//!
//! [variant ag]
//!
//! [variant base]
//! grammar_iterations = 0
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use actiongram_core::grammar::Calculator;
use actiongram_core::orchestrator::{EstimatorKind, ReplayKind};
use actiongram_core::{ConfigError, EnvSpec, GridSpec, RunConfig};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("unknown key `{key}` in [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("bad value `{value}` for `{key}`: expected {expected}")]
    BadValue {
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("`{0}` given twice in one section")]
    DuplicateKey(String),
    #[error("variant label `{0}` is used twice")]
    DuplicateLabel(String),
    #[error("variant label `{0}` may only use letters, digits, '-', '_' and '.'")]
    BadLabel(String),
    #[error("at least one seed is required")]
    NoSeeds,
    #[error("variant `{label}`: {source}")]
    Invalid { label: String, source: ConfigError },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// A spec file as written: ordered sections of ordered entries.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Document {
    pub sections: Vec<Section>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub name: String,
    pub entries: Vec<(String, String)>,
}

impl Section {
    fn new(name: impl Into<String>) -> Self {
        Section {
            name: name.into(),
            entries: Vec::new(),
        }
    }

    fn push(&mut self, key: &str, value: impl Into<String>) {
        self.entries.push((key.to_string(), value.into()));
    }
}

impl Document {
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        let mut doc = Document::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let syntax = |message: &str| SpecError::Syntax {
                line: i + 1,
                message: message.to_string(),
            };
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| syntax("unterminated section header"))?;
                let name = name.split_whitespace().collect::<Vec<_>>().join(" ");
                if name.is_empty() {
                    return Err(syntax("empty section name"));
                }
                doc.sections.push(Section::new(name));
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| syntax("expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty()
                || !key
                    .bytes()
                    .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
            {
                return Err(syntax("keys are lowercase letters, digits and '_'"));
            }
            let section = doc
                .sections
                .last_mut()
                .ok_or_else(|| syntax("entry before any section"))?;
            if section.entries.iter().any(|(k, _)| k == key) {
                return Err(SpecError::DuplicateKey(key.to_string()));
            }
            section.push(key, value);
        }
        Ok(doc)
    }

    /// Canonical text: `key = value` lines, one blank line between sections.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, section) in self.sections.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "[{}]", section.name);
            for (k, v) in &section.entries {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub label: String,
    /// Every parameter except the seed, which comes from the seed list.
    pub config: RunConfig,
}

/// Runs to perform: every variant under every seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    /// Worker count; defaults to the number of seeds.
    pub parallelism: Option<usize>,
    pub base: RunConfig,
    pub variants: Vec<Variant>,
}

pub const DEFAULT_LABEL: &str = "default";

fn bad(key: &str, value: &str, expected: &'static str) -> SpecError {
    SpecError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        expected,
    }
}

fn number<T: std::str::FromStr>(
    key: &str,
    value: &str,
    expected: &'static str,
) -> Result<T, SpecError> {
    value.parse().map_err(|_| bad(key, value, expected))
}

fn switch(key: &str, value: &str) -> Result<bool, SpecError> {
    match value {
        "on" | "true" | "yes" => Ok(true),
        "off" | "false" | "no" => Ok(false),
        _ => Err(bad(key, value, "on or off")),
    }
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

/// Map rows joined with `/`, since values live on a single line.
fn map_value(spec: &GridSpec) -> String {
    spec.to_text().replace('\n', "/")
}

/// Every run parameter as spec entries, in a fixed order.
pub fn run_entries(c: &RunConfig) -> Vec<(&'static str, String)> {
    let mut out = Vec::new();
    match &c.env {
        EnvSpec::Hanoi { disks } => {
            out.push(("env", "hanoi".to_string()));
            out.push(("disks", disks.to_string()));
        }
        EnvSpec::Grid(spec) => {
            out.push(("env", "grid".to_string()));
            out.push(("map", map_value(spec)));
        }
    }
    let (calculator, k) = match c.calculator {
        Calculator::Sequitur => ("sequitur", None),
        Calculator::KSequitur(k) => ("k", Some(k)),
        Calculator::Mdl => ("mdl", None),
    };
    out.extend([
        ("step_penalty", c.step_penalty.to_string()),
        (
            "estimator",
            match c.estimator {
                EstimatorKind::Tabular => "tabular",
                EstimatorKind::Linear => "linear",
            }
            .to_string(),
        ),
        ("gamma", c.gamma.to_string()),
        ("alpha", c.alpha.to_string()),
        ("epsilon_start", c.epsilon_start.to_string()),
        ("epsilon_end", c.epsilon_end.to_string()),
        ("epsilon_decay_steps", c.epsilon_decay_steps.to_string()),
        ("batch_size", c.batch_size.to_string()),
        ("target_refresh", c.target_refresh.to_string()),
        ("initial_random_steps", c.initial_random_steps.to_string()),
        ("replay_capacity", c.replay_capacity.to_string()),
        ("grammar_iterations", c.grammar_iterations.to_string()),
        ("steps_before_grammar", c.steps_before_grammar.to_string()),
        ("eval_period", c.eval_period.to_string()),
        ("evaluation_episodes", c.evaluation_episodes.to_string()),
        (
            "abandon_z",
            c.abandon_z
                .map_or_else(|| "off".to_string(), |z| z.to_string()),
        ),
        ("exploration_bonus", c.exploration_bonus.to_string()),
        ("calculator", calculator.to_string()),
    ]);
    if let Some(k) = k {
        out.push(("k", k.to_string()));
    }
    out.extend([
        (
            "replay",
            match c.replay {
                ReplayKind::Balanced => "balanced",
                ReplayKind::Uniform => "uniform",
            }
            .to_string(),
        ),
        ("har", on_off(c.har).to_string()),
        ("transfer", on_off(c.transfer).to_string()),
        (
            "post_inference_random_steps",
            c.post_inference_random_steps.to_string(),
        ),
        ("total_steps", c.total_steps.to_string()),
    ]);
    out
}

/// Applies one section's entries on top of `c`.
///
/// `env` is applied first so `disks` and `map` can follow it in any order;
/// `k` is read together with `calculator`.
fn apply_run_section(c: &mut RunConfig, section: &Section) -> Result<(), SpecError> {
    let get = |key: &str| {
        section
            .entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    };
    if let Some(env) = get("env") {
        match env {
            "hanoi" => {
                if !matches!(c.env, EnvSpec::Hanoi { .. }) {
                    c.env = EnvSpec::Hanoi { disks: 3 };
                }
            }
            "grid" => {
                let map = get("map")
                    .ok_or_else(|| bad("env", env, "a `map` entry alongside `env = grid`"))?;
                let spec = GridSpec::parse(&map.replace('/', "\n"))
                    .map_err(|_| bad("map", map, "a grid map"))?;
                c.env = EnvSpec::Grid(spec);
            }
            _ => return Err(bad("env", env, "hanoi or grid")),
        }
    }
    for (key, value) in &section.entries {
        let (key, value) = (key.as_str(), value.as_str());
        match key {
            "env" => {}
            "disks" => match &mut c.env {
                EnvSpec::Hanoi { disks } => *disks = number(key, value, "a disk count")?,
                EnvSpec::Grid(_) => {
                    return Err(bad(key, value, "no `disks` for grid environments"))
                }
            },
            "map" => {
                let spec = GridSpec::parse(&value.replace('/', "\n"))
                    .map_err(|_| bad(key, value, "a grid map"))?;
                match &mut c.env {
                    EnvSpec::Grid(current) => *current = spec,
                    EnvSpec::Hanoi { .. } => {
                        return Err(bad(key, value, "`env = grid` before a map"))
                    }
                }
            }
            "step_penalty" => c.step_penalty = number(key, value, "a number")?,
            "estimator" => {
                c.estimator = match value {
                    "tabular" => EstimatorKind::Tabular,
                    "linear" => EstimatorKind::Linear,
                    _ => return Err(bad(key, value, "tabular or linear")),
                }
            }
            "gamma" => c.gamma = number(key, value, "a number")?,
            "alpha" => c.alpha = number(key, value, "a number")?,
            "epsilon_start" => c.epsilon_start = number(key, value, "a number")?,
            "epsilon_end" => c.epsilon_end = number(key, value, "a number")?,
            "epsilon_decay_steps" => c.epsilon_decay_steps = number(key, value, "a step count")?,
            "batch_size" => c.batch_size = number(key, value, "a count")?,
            "target_refresh" => c.target_refresh = number(key, value, "a count")?,
            "initial_random_steps" => c.initial_random_steps = number(key, value, "a step count")?,
            "replay_capacity" => c.replay_capacity = number(key, value, "a count")?,
            "grammar_iterations" => c.grammar_iterations = number(key, value, "a count")?,
            "steps_before_grammar" => c.steps_before_grammar = number(key, value, "a step count")?,
            "eval_period" => c.eval_period = number(key, value, "an episode count")?,
            "evaluation_episodes" => {
                c.evaluation_episodes = number(key, value, "an episode count")?
            }
            "abandon_z" => {
                c.abandon_z = match value {
                    "off" => None,
                    _ => Some(number(key, value, "a number or off")?),
                }
            }
            "exploration_bonus" => c.exploration_bonus = number(key, value, "a number")?,
            "calculator" => {
                c.calculator = match value {
                    "sequitur" => Calculator::Sequitur,
                    "mdl" => Calculator::Mdl,
                    "k" => Calculator::KSequitur(match get("k") {
                        Some(k) => number("k", k, "an integer")?,
                        None => 2,
                    }),
                    _ => return Err(bad(key, value, "sequitur, k or mdl")),
                }
            }
            "k" => {
                let k = number("k", value, "an integer")?;
                match &mut c.calculator {
                    Calculator::KSequitur(current) => *current = k,
                    _ => return Err(bad(key, value, "`calculator = k` alongside `k`")),
                }
            }
            "replay" => {
                c.replay = match value {
                    "balanced" => ReplayKind::Balanced,
                    "uniform" => ReplayKind::Uniform,
                    _ => return Err(bad(key, value, "balanced or uniform")),
                }
            }
            "har" => c.har = switch(key, value)?,
            "transfer" => c.transfer = switch(key, value)?,
            "post_inference_random_steps" => {
                c.post_inference_random_steps = number(key, value, "a step count")?
            }
            "total_steps" => c.total_steps = number(key, value, "a step count")?,
            _ => {
                return Err(SpecError::UnknownKey {
                    section: section.name.clone(),
                    key: key.to_string(),
                })
            }
        }
    }
    Ok(())
}

fn valid_label(label: &str) -> bool {
    !label.is_empty()
        && label
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_' || b == b'.')
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        Self::from_document(&Document::parse(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, SpecError> {
        let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn from_document(doc: &Document) -> Result<Self, SpecError> {
        let mut seeds = Vec::new();
        let mut output = PathBuf::from("results");
        let mut parallelism = None;
        let mut base = RunConfig::default();
        let mut variant_sections = Vec::new();
        for section in &doc.sections {
            match section.name.as_str() {
                "experiment" => {
                    for (key, value) in &section.entries {
                        match key.as_str() {
                            "seeds" => {
                                seeds = value
                                    .split(',')
                                    .map(|s| number(key, s.trim(), "comma-separated integers"))
                                    .collect::<Result<_, _>>()?
                            }
                            "output" => output = PathBuf::from(value),
                            "parallelism" => {
                                match number::<usize>(key, value, "a positive integer")? {
                                    0 => return Err(bad(key, value, "a positive integer")),
                                    n => parallelism = Some(n),
                                }
                            }
                            _ => {
                                return Err(SpecError::UnknownKey {
                                    section: section.name.clone(),
                                    key: key.clone(),
                                })
                            }
                        }
                    }
                }
                "run" => apply_run_section(&mut base, section)?,
                name => match name.strip_prefix("variant ") {
                    Some(label) => variant_sections.push((label.to_string(), section)),
                    None => return Err(SpecError::UnknownSection(name.to_string())),
                },
            }
        }
        if seeds.is_empty() {
            return Err(SpecError::NoSeeds);
        }
        let mut variants: Vec<Variant> = Vec::new();
        for (label, section) in variant_sections {
            if !valid_label(&label) {
                return Err(SpecError::BadLabel(label));
            }
            if variants.iter().any(|v| v.label == label) {
                return Err(SpecError::DuplicateLabel(label));
            }
            let mut config = base.clone();
            apply_run_section(&mut config, section)?;
            variants.push(Variant { label, config });
        }
        if variants.is_empty() {
            variants.push(Variant {
                label: DEFAULT_LABEL.to_string(),
                config: base.clone(),
            });
        }
        for v in &variants {
            v.config.validate().map_err(|source| SpecError::Invalid {
                label: v.label.clone(),
                source,
            })?;
        }
        Ok(ExperimentSpec {
            seeds,
            output,
            parallelism,
            base,
            variants,
        })
    }

    /// Fully explicit document: every run parameter under `[run]`, and each
    /// variant listing only what differs from it.
    pub fn to_document(&self) -> Document {
        let mut experiment = Section::new("experiment");
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        experiment.push("seeds", seeds.join(", "));
        experiment.push("output", self.output.display().to_string());
        if let Some(n) = self.parallelism {
            experiment.push("parallelism", n.to_string());
        }
        let mut run = Section::new("run");
        let base = run_entries(&self.base);
        for (k, v) in &base {
            run.push(k, v.clone());
        }
        let mut sections = vec![experiment, run];
        for variant in &self.variants {
            let mut section = Section::new(format!("variant {}", variant.label));
            let entries = run_entries(&variant.config);
            let env_changed = entries.iter().take(2).ne(base.iter().take(2));
            for (k, v) in entries {
                let differs = !base.contains(&(k, v.clone()));
                let env_key = matches!(k, "env" | "disks" | "map");
                if (env_key && env_changed) || (!env_key && differs) {
                    section.push(k, v);
                }
            }
            sections.push(section);
        }
        Document { sections }
    }

    /// Worker count actually used.
    pub fn workers(&self) -> usize {
        self.parallelism.unwrap_or(self.seeds.len()).max(1)
    }
}
