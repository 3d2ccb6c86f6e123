//! Command-line entry point: change maps, cohort evaluation, sweeps and
//! phantom generation.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{ChangeArgs, EvaluateArgs, PhantomArgs};
use config::{CommonArgs, RunConfig};

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError { code: EXIT_VALIDATION, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError { code: EXIT_IO, message: message.into() }
    }
}

impl From<lesion_change::Error> for CliError {
    fn from(e: lesion_change::Error) -> Self {
        let code = if e.is_io() { EXIT_IO } else { EXIT_VALIDATION };
        CliError { code, message: e.to_string() }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "lesion-change",
    version,
    about = "Confident new / missing lesion detection between MRI timepoints",
    after_help = "Exit codes: 0 success, 1 validation error, 2 I/O error, 3 some cases failed."
)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compare two timepoints and write new / missing lesion maps with a report
    Change(ChangeArgs),
    /// Score every consecutive pair of a cohort and write ROC reports
    Evaluate(EvaluateArgs),
    /// Recompute method AUCs over a parameter grid
    Sweep(EvaluateArgs),
    /// Generate a synthetic cohort with known progression labels
    Phantom(PhantomArgs),
}

fn dispatch(command: &Command, cfg: &RunConfig) -> Result<i32, CliError> {
    match command {
        Command::Change(args) => commands::change(args, cfg),
        Command::Evaluate(args) => commands::evaluate(args, cfg),
        Command::Sweep(args) => commands::run_sweep(args, cfg),
        Command::Phantom(args) => commands::phantom(args, cfg),
    }
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    let cfg = cli.common.resolve()?;
    cfg.validate()?;
    match cfg.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::validation(format!("--jobs {jobs}: {e}")))?
            .install(|| dispatch(&cli.command, &cfg)),
        None => dispatch(&cli.command, &cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_SUCCESS };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn help_annotates_defaults() {
        let help = Cli::command().render_long_help().to_string();
        for needle in ["[default: 0.05]", "[default: 0.45]", "[default: 12]", "[default: 26]", "[default: 1]", "[default: confidence]"] {
            assert!(help.contains(needle), "help lacks {needle}");
        }
        for flag in ["--q", "--margin", "--rule", "--min-voxels", "--connectivity", "--grid-spacing", "--jobs", "--out", "--config"] {
            assert!(help.contains(flag), "help lacks {flag}");
        }
    }
}
