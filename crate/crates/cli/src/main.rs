use std::path::PathBuf;
use std::process::ExitCode;

use actiongram::{cmd_ablate, cmd_grammar, cmd_run, CliError, OUTPUT_ENV};
use actiongram_core::grammar::Calculator;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "actiongram",
    version,
    about = "Action-grammar reinforcement learning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every variant of a spec under every seed.
    Run { spec: PathBuf },
    /// Run the HAR x replay x abandon x transfer factorial against the base agent.
    Ablate { spec: PathBuf },
    /// Infer a grammar from a file of whitespace-separated integers.
    Grammar {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "sequitur")]
        calculator: CalculatorArg,
        /// Repeat threshold for the k calculator.
        #[arg(long, default_value_t = 2)]
        k: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CalculatorArg {
    Sequitur,
    K,
    Mdl,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let out = std::env::var_os(OUTPUT_ENV).map(PathBuf::from);
    let result = match cli.command {
        Command::Run { spec } => cmd_run(&spec, out.as_deref()).map(|_| ()),
        Command::Ablate { spec } => cmd_ablate(&spec, out.as_deref()).map(|_| ()),
        Command::Grammar {
            input,
            calculator,
            k,
        } => {
            let calculator = match calculator {
                CalculatorArg::Sequitur => Calculator::Sequitur,
                CalculatorArg::Mdl => Calculator::Mdl,
                CalculatorArg::K if k < 2 => {
                    eprintln!("error: --k must be at least 2");
                    return ExitCode::from(1);
                }
                CalculatorArg::K => Calculator::KSequitur(k),
            };
            cmd_grammar(&input, calculator)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e),
    }
}

fn report(e: CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}
