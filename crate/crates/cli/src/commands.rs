//! Subcommand implementations.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use actiongram_core::grammar::{Calculator, Grammar};
use actiongram_core::orchestrator::ReplayKind;
use actiongram_core::{run, RunConfig, RunError, RunMetrics};
use thiserror::Error;

use crate::config::{ExperimentSpec, SpecError, Variant};
use crate::metrics::{write_episodes, write_grammars, write_summary, SummaryRow};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{failed} of {total} runs failed")]
    RunsFailed { failed: usize, total: usize },
}

impl CliError {
    /// 1 for bad input, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Spec(_) | CliError::Usage(_) => 1,
            CliError::Io { .. } | CliError::RunsFailed { .. } => 2,
        }
    }
}

fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One (variant, seed) pair.
#[derive(Debug, Clone)]
pub struct Job {
    pub label: String,
    pub seed: u64,
    pub config: RunConfig,
}

#[derive(Debug, Clone)]
pub struct Finished {
    pub job: Job,
    pub result: Result<RunMetrics, RunError>,
}

/// Runs every job on at most `workers` threads; results keep job order.
pub fn run_jobs(jobs: Vec<Job>, workers: usize) -> Vec<Finished> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<RunMetrics, RunError>>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, jobs.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let started = Instant::now();
                let result = run(&job.config).map(|mut m| {
                    m.wall_clock_secs = Some(started.elapsed().as_secs_f64());
                    m
                });
                *slots[i].lock().expect("no panics while holding the lock") = Some(result);
            });
        }
    });
    jobs.into_iter()
        .zip(slots)
        .map(|(job, slot)| Finished {
            job,
            result: slot
                .into_inner()
                .expect("lock not poisoned")
                .expect("every job ran"),
        })
        .collect()
}

pub fn run_file_stem(label: &str, seed: u64) -> String {
    format!("{label}-seed{seed}")
}

/// Writes per-run files and the summary; errors if any run failed.
fn execute(
    variants: &[Variant],
    spec: &ExperimentSpec,
    output: &Path,
    summary_name: &str,
) -> Result<PathBuf, CliError> {
    fs::create_dir_all(output).map_err(io_at(output))?;
    let jobs: Vec<Job> = variants
        .iter()
        .flat_map(|v| {
            spec.seeds.iter().map(move |&seed| Job {
                label: v.label.clone(),
                seed,
                config: RunConfig {
                    seed,
                    ..v.config.clone()
                },
            })
        })
        .collect();
    let total = jobs.len();
    let finished = run_jobs(jobs, spec.workers());
    let mut failed = 0;
    for f in &finished {
        let stem = run_file_stem(&f.job.label, f.job.seed);
        match &f.result {
            Ok(m) => {
                for w in &m.warnings {
                    eprintln!("warning: {stem}: {w}");
                }
                let path = output.join(format!("{stem}.csv"));
                let file = File::create(&path).map_err(io_at(&path))?;
                write_episodes(BufWriter::new(file), m).map_err(io_at(&path))?;
                let path = output.join(format!("{stem}.grammar.txt"));
                let file = File::create(&path).map_err(io_at(&path))?;
                write_grammars(BufWriter::new(file), m).map_err(io_at(&path))?;
                println!(
                    "{stem}: {} episodes, {} steps, final score {}, first solve {}, {:.2}s",
                    m.episodes.len(),
                    m.total_steps,
                    m.final_score()
                        .map_or_else(|| "-".to_string(), |s| s.to_string()),
                    m.first_solve_step()
                        .map_or_else(|| "-".to_string(), |s| s.to_string()),
                    m.wall_clock_secs.unwrap_or(0.0)
                );
            }
            Err(e) => {
                failed += 1;
                eprintln!("error: {stem}: {e}");
            }
        }
    }
    let rows: Vec<SummaryRow> = variants
        .iter()
        .map(|v| {
            let runs: Vec<&RunMetrics> = finished
                .iter()
                .filter(|f| f.job.label == v.label)
                .filter_map(|f| f.result.as_ref().ok())
                .collect();
            SummaryRow::new(&v.label, &v.config, &runs)
        })
        .collect();
    let path = output.join(summary_name);
    let file = File::create(&path).map_err(io_at(&path))?;
    write_summary(BufWriter::new(file), &rows).map_err(io_at(&path))?;
    println!("wrote {}", path.display());
    if failed > 0 {
        return Err(CliError::RunsFailed { failed, total });
    }
    Ok(path)
}

fn output_dir(spec: &ExperimentSpec, override_dir: Option<&Path>) -> PathBuf {
    override_dir.map_or_else(|| spec.output.clone(), Path::to_path_buf)
}

/// Every variant under every seed, then `summary.csv`.
pub fn cmd_run(spec_path: &Path, override_dir: Option<&Path>) -> Result<PathBuf, CliError> {
    let spec = ExperimentSpec::load(spec_path)?;
    execute(
        &spec.variants,
        &spec,
        &output_dir(&spec, override_dir),
        "summary.csv",
    )
}

/// Labels of the factorial arms, in run order.
pub fn ablation_variants(base: &RunConfig) -> Vec<Variant> {
    let mut out = vec![Variant {
        label: "base".to_string(),
        config: base.base_agent(),
    }];
    for har in [true, false] {
        for replay in [ReplayKind::Balanced, ReplayKind::Uniform] {
            for abandon_z in [None, Some(1.0), Some(2.0)] {
                for transfer in [true, false] {
                    let label = format!(
                        "{}-{}-{}-{}",
                        if har { "har" } else { "noHar" },
                        match replay {
                            ReplayKind::Balanced => "balanced",
                            ReplayKind::Uniform => "uniform",
                        },
                        abandon_z.map_or_else(|| "zOff".to_string(), |z| format!("z{z}")),
                        if transfer { "transfer" } else { "noTransfer" },
                    );
                    let config = RunConfig {
                        grammar_iterations: base.grammar_iterations.max(1),
                        har,
                        replay,
                        abandon_z,
                        transfer,
                        ..base.clone()
                    };
                    out.push(Variant { label, config });
                }
            }
        }
    }
    out
}

/// The 24 factorial arms plus the grammar-free baseline, on the `[run]`
/// parameters and shared seeds; writes `ablation.csv`.
pub fn cmd_ablate(spec_path: &Path, override_dir: Option<&Path>) -> Result<PathBuf, CliError> {
    let spec = ExperimentSpec::load(spec_path)?;
    if spec.variants.len() > 1 || spec.variants[0].label != crate::config::DEFAULT_LABEL {
        eprintln!("note: ablate uses only the [run] section; [variant] sections are ignored");
    }
    let variants = ablation_variants(&spec.base);
    execute(
        &variants,
        &spec,
        &output_dir(&spec, override_dir),
        "ablation.csv",
    )
}

pub fn parse_tokens(text: &str) -> Result<Vec<usize>, CliError> {
    text.split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| CliError::Usage(format!("`{t}` is not a non-negative integer")))
        })
        .collect()
}

/// Rules, macros and encoding costs of the token sequence in `text`.
pub fn grammar_report(text: &str, calculator: Calculator) -> Result<String, CliError> {
    let tokens = parse_tokens(text)?;
    let grammar = calculator
        .infer(&tokens)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let raw = Grammar::rule_free(&tokens).encoding_cost();
    let mut out = String::new();
    use std::fmt::Write as _;
    let _ = writeln!(out, "calculator: {calculator}");
    let _ = writeln!(out, "{} tokens", tokens.len());
    let _ = writeln!(out, "{} rules", grammar.rule_count());
    out.push_str(&grammar.to_text());
    let macros = grammar.extract_macros();
    let _ = writeln!(out, "{} macros", macros.len());
    for m in &macros {
        let body: Vec<String> = m.primitives.iter().map(usize::to_string).collect();
        let _ = writeln!(out, "  {}", body.join(" "));
    }
    let _ = writeln!(out, "cost raw: {raw:.3} bits");
    let _ = writeln!(out, "cost grammar: {:.3} bits", grammar.encoding_cost());
    Ok(out)
}

pub fn cmd_grammar(input: &Path, calculator: Calculator) -> Result<(), CliError> {
    let text = fs::read_to_string(input).map_err(|source| {
        CliError::Spec(SpecError::Io {
            path: input.to_path_buf(),
            source,
        })
    })?;
    let report = grammar_report(&text, calculator)?;
    let mut stdout = std::io::stdout().lock();
    stdout
        .write_all(report.as_bytes())
        .map_err(io_at(Path::new("<stdout>")))
}
