//! `ams`: run AMS ensembles, direct simulations, committor solves and
//! three-level tables from a JSON config.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use output::OutputDir;

#[derive(Parser)]
#[command(name = "ams", version, about = "Adaptive multilevel splitting workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment config; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory [default: out].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Independent AMS realizations: records as JSON lines plus a summary.
    RunAms,
    /// Direct Monte-Carlo estimate of the crossing probability.
    RunDns,
    /// Committor table (1-D) or grid file (2-D).
    Committor,
    /// AMS ensembles over lists of time steps and clone counts.
    EnsembleSweep,
    /// Mean reactive durations of the three-level model.
    ThreeLevel,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::RunAms => "run-ams",
            Command::RunDns => "run-dns",
            Command::Committor => "committor",
            Command::EnsembleSweep => "ensemble-sweep",
            Command::ThreeLevel => "three-level",
        }
    }
}

fn run(cli: Cli) -> Result<commands::Flags> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    if let Some(t) = cfg.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().context("setting up the thread pool")?;
    }
    let dir = cli.out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let mut out = OutputDir::create(&dir)?;
    let flags = match cli.command {
        Command::RunAms => commands::run_ams(&cfg, &mut out)?,
        Command::RunDns => commands::run_dns(&cfg, &mut out)?,
        Command::Committor => commands::committor(&cfg, &mut out)?,
        Command::EnsembleSweep => commands::ensemble_sweep(&cfg, &mut out)?,
        Command::ThreeLevel => commands::three_level(&cfg, &mut out)?,
    };
    out.finish(cli.command.name(), &cfg)?;
    Ok(flags)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(flags) if flags.failed == 0 => ExitCode::SUCCESS,
        Ok(flags) => {
            eprintln!("ams: {}", flags.message.join("; "));
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("ams: {e:#}");
            ExitCode::FAILURE
        }
    }
}
