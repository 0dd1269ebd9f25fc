//! Command-line harness: `doc3 <command> [--config FILE] [--seed N] [--out DIR]`.
//!
//! Every command validates its configuration, does all of its work in
//! memory and only then writes `report.toml` plus any data files into the
//! output directory.

mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

pub use commands::{synthesize, PenaltyForm, SynthData, SynthSpec, TrainPlan, UniversumSource};
pub use config::Config;
pub use report::Report;

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "doc3", version, about = "One-class classification with contradictions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the `seed` key of the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "doc3-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Built-in data setup; `paper-synthetic` is the only preset.
    #[arg(long)]
    pub preset: Option<String>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Generate train/test/universum CSV files.
    Synth(SynthArgs),
    /// Train a DOC, DOC3 or binary baseline model.
    Train(CommonArgs),
    /// AUC, accuracy, slacks and correlations of a model on test data.
    Eval(CommonArgs),
    /// Rademacher-complexity estimates and bounds for a trained model.
    Bound(CommonArgs),
    /// Train/universum correlation on raw inputs and model features.
    Corr(CommonArgs),
    /// Solve the linear hinge dual, map it to a nu-SVM and compare boundaries.
    DualityCheck(CommonArgs),
    /// Train and evaluate a hyperparameter grid.
    Sweep(CommonArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Bound(_) => "bound",
            Command::Corr(_) => "corr",
            Command::DualityCheck(_) => "duality-check",
            Command::Sweep(_) => "sweep",
        }
    }

    fn common(&self) -> &CommonArgs {
        match self {
            Command::Synth(a) => &a.common,
            Command::Train(a)
            | Command::Eval(a)
            | Command::Bound(a)
            | Command::Corr(a)
            | Command::DualityCheck(a)
            | Command::Sweep(a) => a,
        }
    }
}

/// Runs a parsed command; returns the report that was written.
pub fn run(cli: &Cli) -> Result<Report> {
    let start = Instant::now();
    let args = cli.command.common();
    let mut cfg = match &args.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = args.seed {
        cfg.set("seed", s.to_string());
    }
    if let Command::Synth(SynthArgs { preset: Some(p), .. }) = &cli.command {
        cfg.set("synth.preset", p.clone());
    }
    let seed: u64 = cfg.get_or("seed", 0)?;
    cfg.set("seed", seed.to_string());

    let mut report = Report::new(cli.command.name(), cfg.entries().clone());
    let mut out = commands::Outputs::new(&args.out);
    match &cli.command {
        Command::Synth(_) => commands::cmd_synth(&cfg, seed, &mut report, &mut out)?,
        Command::Train(_) => commands::cmd_train(&cfg, seed, &mut report, &mut out)?,
        Command::Eval(_) => commands::cmd_eval(&cfg, seed, &mut report, &mut out)?,
        Command::Bound(_) => commands::cmd_bound(&cfg, seed, &mut report, &mut out)?,
        Command::Corr(_) => commands::cmd_corr(&cfg, seed, &mut report, &mut out)?,
        Command::DualityCheck(_) => commands::cmd_duality(&cfg, seed, &mut report, &mut out)?,
        Command::Sweep(_) => commands::cmd_sweep(&cfg, seed, &mut report, &mut out)?,
    }
    report.timing.elapsed_seconds = start.elapsed().as_secs_f64();
    out.commit(&report)?;
    Ok(report)
}

/// Process exit status for a command outcome.
pub fn exit_code(result: &Result<Report>) -> i32 {
    match result {
        Ok(_) => 0,
        Err(e) if e.is_config_error() => 1,
        Err(_) => 2,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = run(&cli);
    match &result {
        Ok(r) => println!(
            "{}: wrote {}",
            r.command,
            cli.command.common().out.join("report.toml").display()
        ),
        Err(e) => eprintln!("error: {e}"),
    }
    exit_code(&result)
}

impl From<clap::Error> for Error {
    fn from(e: clap::Error) -> Self {
        Error::Config(e.to_string())
    }
}
