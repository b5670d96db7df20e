//! Command-line front end: train the networks, explain single predictions,
//! run the faithfulness simulation and select user-study stimuli.

mod config;
mod explain;
mod simulate;
mod stimuli;
mod svg;
mod train;
mod workspace;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uncertain_attr::data::UncertaintyLevel;

use crate::config::{parse_levels, RunConfig};
use crate::explain::{parse_techniques, ExplainArgs, Propagation};
use crate::svg::UncertaintyStyle;
use crate::workspace::Workspace;

/// Bad flags, config or inputs. Exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// The run completed but produced nothing to report. Exit code 3.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct EmptyResult(pub String);

#[derive(Parser)]
#[command(name = "uncertain-attr", version, about = "Feature attributions under input uncertainty")]
struct Cli {
    /// JSON run configuration; defaults apply to missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the master seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the CSV delimiter.
    #[arg(long, global = true)]
    delimiter: Option<char>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the baseline and the regularized networks.
    Train {
        /// Comma-separated uncertainty levels, one regularized network each.
        #[arg(long)]
        levels: Option<String>,
        /// Also train the networks for the penalty sweep.
        #[arg(long)]
        sweep: bool,
    },
    /// Explain one test instance with every technique and draw tornado charts.
    Explain {
        /// Row of the test split.
        #[arg(long, default_value_t = 0)]
        instance: usize,
        /// Comma-separated: lime, reg_lime, ig_nn, ig_regnn or all.
        #[arg(long, default_value = "all")]
        technique: String,
        #[arg(long, value_enum, default_value_t = UncertaintyStyle::Violin)]
        uncertainty_style: UncertaintyStyle,
        #[arg(long, value_enum, default_value_t = Propagation::Fixed)]
        propagation: Propagation,
        /// Keep the raw attribution samples in the report.
        #[arg(long)]
        emit_samples: bool,
        #[arg(long)]
        level: Option<String>,
    },
    /// Faithfulness records, improvement curves and explanation distances.
    Simulate {
        #[arg(long)]
        levels: Option<String>,
        /// Add the penalty sweep tables.
        #[arg(long)]
        sweep: bool,
    },
    /// Select the practice and main stimuli.
    Stimuli {
        #[arg(long)]
        level: Option<String>,
        /// Display-scale score window as `LOW,HIGH`.
        #[arg(long)]
        window: Option<String>,
    },
}

fn single_level(s: Option<String>) -> anyhow::Result<Option<UncertaintyLevel>> {
    s.map(|s| {
        let levels = parse_levels(&s)?;
        if levels.len() != 1 {
            return Err(UsageError(format!("expected one uncertainty level, got `{s}`")).into());
        }
        Ok(levels[0])
    })
    .transpose()
}

fn parse_window(s: &str) -> anyhow::Result<(f64, f64)> {
    let bad = || UsageError(format!("window must look like `40,60`, got `{s}`"));
    let (lo, hi) = s.split_once(',').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    Ok((lo, hi))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut config = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = cli.out {
        config.output_dir = out;
    }
    if let Some(d) = cli.delimiter {
        config.delimiter = d;
    }
    let ws = Workspace::prepare(config)?;
    match cli.command {
        Command::Train { levels, sweep } => {
            let levels = ws.levels_or_default(levels.as_deref().map(parse_levels).transpose()?);
            train::run(&ws, &levels, sweep)
        }
        Command::Explain { instance, technique, uncertainty_style, propagation, emit_samples, level } => {
            let args = ExplainArgs {
                instance,
                techniques: parse_techniques(&technique)?,
                style: uncertainty_style,
                propagation,
                emit_samples,
                level: single_level(level)?,
            };
            explain::run(&ws, &args)
        }
        Command::Simulate { levels, sweep } => {
            let levels = ws.levels_or_default(levels.as_deref().map(parse_levels).transpose()?);
            simulate::run(&ws, &levels, sweep)
        }
        Command::Stimuli { level, window } => {
            let window = window.as_deref().map(parse_window).transpose()?;
            stimuli::run(&ws, single_level(level)?, window)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use uncertain_attr::Error as E;
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if cause.is::<EmptyResult>() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Io { .. }
                | E::Csv(_)
                | E::Json(_)
                | E::MissingColumn(_)
                | E::Parse { .. }
                | E::DegenerateFeature(_)
                | E::Argument(_) => 2,
                E::Balance { .. } => 3,
                _ => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
