//! Command-line front end: generate | train | stress | report, all driven
//! by one JSON config. Exit codes: 0 success, 2 config error, 3 partial
//! failure (some work units failed; the rest completed).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stresslab_core::campaign::{
    cmd_generate, cmd_report, cmd_stress, cmd_train, load_config, CmdOutcome, Config, Scope,
};
use stresslab_core::problems::PdeFamily;
use stresslab_core::stress::ScenarioKind;
use stresslab_core::Error;

#[derive(Parser)]
#[command(name = "stresslab", about = "Train PDE surrogates and stress-test them")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Campaign config (JSON). Omit to use built-in desk-scale defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for independent (task, seed) units.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Run work units serially for byte-for-byte comparisons.
    #[arg(long, global = true)]
    deterministic: bool,

    /// Restrict to one task family (nls|poisson|ns|bs|ks).
    #[arg(long, global = true)]
    pde: Option<String>,

    /// Restrict stress/report to one scenario kind.
    #[arg(long, global = true)]
    scenario: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample datasets and write manifests + field files.
    Generate,
    /// Train one model per (task, seed) and checkpoint it.
    Train,
    /// Run the stress scenarios against frozen checkpoints.
    Stress,
    /// Aggregate results into summary tables and SVG figures.
    Report,
}

fn build_scope(cli: &Cli) -> Result<Scope, Error> {
    let mut scope = Scope::default();
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        scope.jobs = j;
    }
    scope.deterministic = cli.deterministic;
    if let Some(tag) = &cli.pde {
        scope.pde = Some(PdeFamily::from_tag(tag)?);
    }
    if let Some(tag) = &cli.scenario {
        scope.scenario = Some(ScenarioKind::from_tag(tag)?);
    }
    Ok(scope)
}

fn run() -> Result<CmdOutcome, Error> {
    let cli = Cli::parse();
    let cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => Config::default(),
    };
    let scope = build_scope(&cli)?;
    match cli.command {
        Command::Generate => cmd_generate(&cfg, &scope),
        Command::Train => cmd_train(&cfg, &scope),
        Command::Stress => cmd_stress(&cfg, &scope),
        Command::Report => cmd_report(&cfg, &scope),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(outcome) => {
            println!(
                "completed {} unit(s), skipped {} already done",
                outcome.completed, outcome.skipped
            );
            if outcome.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                for f in &outcome.failures {
                    eprintln!("failed: {f}");
                }
                ExitCode::from(3)
            }
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
