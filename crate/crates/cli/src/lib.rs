//! Experiment runner for `actiongram-core`: spec files, a worker pool,
//! CSV metrics and the `actiongram` command line.

pub mod commands;
pub mod config;
pub mod metrics;

pub use commands::{cmd_ablate, cmd_grammar, cmd_run, CliError};
pub use config::{Document, ExperimentSpec, SpecError, Variant};

/// Environment variable that overrides a spec's output directory.
pub const OUTPUT_ENV: &str = "ACTIONGRAM_OUT";
