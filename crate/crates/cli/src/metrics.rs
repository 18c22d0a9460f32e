//! CSV and text output of run metrics.
//!
//! Every CSV starts with a `#` schema line naming its version, then a header
//! row. Wall-clock time is never written, so reruns are byte-identical.

use std::io::{self, Write};

use actiongram_core::grammar::Calculator;
use actiongram_core::orchestrator::ReplayKind;
use actiongram_core::{RunConfig, RunMetrics};

pub const EPISODES_SCHEMA: &str = "# actiongram episodes v1";
pub const SUMMARY_SCHEMA: &str = "# actiongram summary v1";

pub const EPISODE_COLUMNS: [&str; 15] = [
    "episode",
    "evaluation",
    "end_step",
    "epsilon",
    "return",
    "length",
    "solved",
    "decisions",
    "macro_decisions",
    "abandoned",
    "macro_attempted",
    "macro_executed",
    "action_count",
    "stored_experiences",
    "grammar_phases",
];

pub const SUMMARY_COLUMNS: [&str; 17] = [
    "variant",
    "grammar_iterations",
    "calculator",
    "har",
    "replay",
    "abandon_z",
    "transfer",
    "runs",
    "final_score_median",
    "final_score_mean",
    "final_score_std",
    "first_solve_median",
    "first_solve_mean",
    "first_solve_std",
    "solved_runs",
    "macros_added_mean",
    "executed_over_attempted",
];

fn csv_error(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    }
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// One row per episode; no-exploration episodes have `evaluation = 1` and
/// their return is the evaluation score.
pub fn write_episodes<W: Write>(mut out: W, metrics: &RunMetrics) -> io::Result<()> {
    writeln!(out, "{EPISODES_SCHEMA}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EPISODE_COLUMNS).map_err(csv_error)?;
    let mut phases = metrics.grammars.iter().peekable();
    let mut done = 0;
    for e in &metrics.episodes {
        while phases.peek().is_some_and(|g| g.episode <= e.episode) {
            phases.next();
            done += 1;
        }
        w.write_record([
            e.episode.to_string(),
            flag(e.evaluation).to_string(),
            e.end_step.to_string(),
            e.epsilon.to_string(),
            e.total_return.to_string(),
            e.length.to_string(),
            flag(e.solved).to_string(),
            e.decisions.to_string(),
            e.macro_decisions.to_string(),
            e.abandoned.to_string(),
            e.macro_attempted.to_string(),
            e.macro_executed.to_string(),
            e.action_count.to_string(),
            e.stored_experiences.to_string(),
            done.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()
}

/// Grammar snapshots: a header line per phase, then the rules, then the
/// macros it added.
pub fn write_grammars<W: Write>(mut out: W, metrics: &RunMetrics) -> io::Result<()> {
    for g in &metrics.grammars {
        writeln!(
            out,
            "# phase {} at step {} (episode {}), calculator {}, {} episode(s) selected",
            g.iteration, g.step, g.episode, g.calculator, g.selected_episodes
        )?;
        out.write_all(g.grammar.as_bytes())?;
        for (id, primitives) in &g.added {
            let body: Vec<String> = primitives.iter().map(usize::to_string).collect();
            writeln!(out, "macro {id} = {}", body.join(" "))?;
        }
    }
    Ok(())
}

/// Median, mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub median: f64,
    pub mean: f64,
    pub std: f64,
}

pub fn stats(values: &[f64]) -> Option<Stats> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Some(Stats { median, mean, std })
}

/// Seed-aggregated results of one variant.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub config: RunConfig,
    pub runs: usize,
    pub final_score: Option<Stats>,
    pub first_solve: Option<Stats>,
    pub solved_runs: usize,
    pub macros_added_mean: f64,
    pub executed_over_attempted: Option<f64>,
}

impl SummaryRow {
    pub fn new(label: &str, config: &RunConfig, runs: &[&RunMetrics]) -> Self {
        let finals: Vec<f64> = runs.iter().filter_map(|m| m.final_score()).collect();
        let solves: Vec<f64> = runs
            .iter()
            .filter_map(|m| m.first_solve_step())
            .map(|s| s as f64)
            .collect();
        let added: usize = runs
            .iter()
            .map(|m| m.grammars.iter().map(|g| g.added.len()).sum::<usize>())
            .sum();
        let attempted: usize = runs
            .iter()
            .flat_map(|m| &m.episodes)
            .map(|e| e.macro_attempted)
            .sum();
        let executed: usize = runs
            .iter()
            .flat_map(|m| &m.episodes)
            .map(|e| e.macro_executed)
            .sum();
        SummaryRow {
            label: label.to_string(),
            config: config.clone(),
            runs: runs.len(),
            final_score: stats(&finals),
            first_solve: stats(&solves),
            solved_runs: solves.len(),
            macros_added_mean: if runs.is_empty() {
                0.0
            } else {
                added as f64 / runs.len() as f64
            },
            executed_over_attempted: (attempted > 0).then(|| executed as f64 / attempted as f64),
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Comparison table, one row per variant. Missing statistics are empty.
pub fn write_summary<W: Write>(mut out: W, rows: &[SummaryRow]) -> io::Result<()> {
    writeln!(out, "{SUMMARY_SCHEMA}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_COLUMNS).map_err(csv_error)?;
    for r in rows {
        let c = &r.config;
        let calculator = match c.calculator {
            Calculator::KSequitur(k) => format!("k{k}"),
            other => other.to_string(),
        };
        w.write_record([
            r.label.clone(),
            c.grammar_iterations.to_string(),
            calculator,
            flag(c.har).to_string(),
            match c.replay {
                ReplayKind::Balanced => "balanced",
                ReplayKind::Uniform => "uniform",
            }
            .to_string(),
            c.abandon_z
                .map_or_else(|| "off".to_string(), |z| z.to_string()),
            flag(c.transfer).to_string(),
            r.runs.to_string(),
            opt(r.final_score.map(|s| s.median)),
            opt(r.final_score.map(|s| s.mean)),
            opt(r.final_score.map(|s| s.std)),
            opt(r.first_solve.map(|s| s.median)),
            opt(r.first_solve.map(|s| s.mean)),
            opt(r.first_solve.map(|s| s.std)),
            r.solved_runs.to_string(),
            r.macros_added_mean.to_string(),
            opt(r.executed_over_attempted),
        ])
        .map_err(csv_error)?;
    }
    w.flush()
}
