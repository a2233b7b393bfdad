//! Command-line front end: synthetic study generation, preprocessing,
//! activity tuning, pretraining, per-cell evaluation, grid scheduling,
//! and reporting. Every command writes its manifest before computing and
//! produces byte-identical outputs when re-run with the same inputs.

mod commands;
mod config;
mod layout;
mod manifest;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Config;
use layout::Layout;

#[derive(Parser)]
#[command(name = "e4pred", version, about = "Wearable-signal event prediction pipeline")]
struct Cli {
    /// JSON configuration file; built-in defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output root directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic study corpus as raw device CSV sessions.
    Generate {
        #[arg(long)]
        subjects: Option<u32>,
        #[arg(long)]
        weeks: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Filter and resample every raw session to aligned model-rate channels.
    Preprocess,
    /// Fit the motion classifier on the labeled calibration intervals.
    TuneActivity,
    /// Train the reconstruction network and its head on the auxiliary corpora.
    Pretrain,
    /// Evaluate one cell: a mode at one window length, gating choice and lead.
    Run {
        #[arg(long)]
        mode: e4pred::trainflow::ApplicationMode,
        /// Window length in seconds (60 or 300).
        #[arg(long, default_value_t = 300)]
        window: u32,
        /// Lead time in seconds (multiple of 60, at most 300).
        #[arg(long, default_value_t = 0)]
        lead: u32,
        /// Drop motion-contaminated windows before training.
        #[arg(long)]
        gate: bool,
        /// Recompute even when the result file already exists.
        #[arg(long)]
        force: bool,
    },
    /// Walk the evaluation grid, most promising rows and columns first.
    Grid {
        /// Stop after recording this many cells.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Export the result table and the summary plot.
    Report,
}

/// An error in how the tool was invoked or configured, as opposed to a
/// failure while running. Validation problems exit 1, runtime and data
/// problems exit 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn is_validation(err: &anyhow::Error) -> bool {
    err.chain().any(|cause| {
        cause.downcast_ref::<UsageError>().is_some()
            || cause.downcast_ref::<config::ConfigError>().is_some()
    })
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    let mut config = Config::load(cli.config.as_deref())?;
    if let Command::Generate {
        subjects,
        weeks,
        seed,
    } = &cli.command
    {
        if let Some(n) = subjects {
            config.subjects = *n;
        }
        if let Some(n) = weeks {
            config.weeks = *n;
        }
        if let Some(s) = seed {
            config.seed = *s;
        }
    }
    config.validate()?;
    let ctx = commands::Ctx {
        config,
        config_path: cli.config.as_ref().map(|p| p.display().to_string()),
        layout: Layout::new(&cli.out),
    };

    match cli.command {
        Command::Generate { .. } => commands::generate::run(&ctx),
        Command::Preprocess => commands::preprocess::run(&ctx),
        Command::TuneActivity => commands::tune_activity::run(&ctx),
        Command::Pretrain => commands::pretrain::run(&ctx),
        Command::Run {
            mode,
            window,
            lead,
            gate,
            force,
        } => commands::run::run(&ctx, mode, window, lead, gate, force),
        Command::Grid { budget } => commands::grid::run(&ctx, budget),
        Command::Report => commands::report::run(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) if err.use_stderr() => {
            // Flag and argument problems are validation errors like any
            // other, so they share exit code 1.
            let _ = err.print();
            return ExitCode::from(1);
        }
        Err(help_or_version) => {
            let _ = help_or_version.print();
            return ExitCode::SUCCESS;
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(if is_validation(&err) { 1 } else { 2 })
        }
    }
}
