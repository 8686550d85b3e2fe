//! `treebolic`: runs the simulation and kernel checks from a JSON config.
//!
//! Exit codes: 0 when every check passes, 2 when a statistical check fails,
//! 1 on configuration or runtime errors.

mod commands;
mod config;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::ExperimentConfig;
use output::{Format, Meta, Report};

#[derive(Parser, Debug)]
#[command(name = "treebolic", version, about = "Brownian motion on treebolic space: experiments and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides sim.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the JSON summary and CSV tables.
    #[arg(long)]
    out: Option<PathBuf>,
    /// What goes to stdout.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Up/down and child frequencies of the embedded chain.
    EmbeddedChain(Common),
    /// Drift rate of the height process and the weak Liouville verdict.
    Drift(Common),
    /// Mean-value residuals of minimal harmonic functions.
    Harmonicity(Common),
    /// Finite differences against Monte Carlo on a strip domain.
    DirichletCompare(Common),
    /// Mass of exits through the vertical sides as the half-width grows.
    ExitTails(Common),
    /// Exit samples as JSON lines.
    SampleExits(Common),
    /// Value of one minimal harmonic function at one point.
    EvalKernel {
        #[command(flatten)]
        common: Common,
        /// Boundary parameter, e.g. '{"kind":"real","zeta":0.5}'.
        #[arg(long)]
        kernel: String,
        /// Point, e.g. '{"x":0,"u":0,"w":"o","t":0}'.
        #[arg(long)]
        point: String,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::EmbeddedChain(c)
            | Command::Drift(c)
            | Command::Harmonicity(c)
            | Command::DirichletCompare(c)
            | Command::ExitTails(c)
            | Command::SampleExits(c) => c,
            Command::EvalKernel { common, .. } => common,
        }
    }
}

fn load(common: &Common) -> Result<(ExperimentConfig, Meta)> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.sim.seed = seed;
    }
    let meta = Meta { config_hash: cfg.hash(), seed: cfg.sim.seed };
    Ok((cfg, meta))
}

fn emit(report: &Report, meta: &Meta, common: &Common) -> Result<bool> {
    if let Some(dir) = &common.out {
        report.write_all(meta, dir)?;
    }
    to_stdout(&report.render(meta, common.format))?;
    Ok(report.pass)
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn to_stdout(s: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(s.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let common = cli.command.common();
    let (cfg, meta) = load(common)?;
    let report = match &cli.command {
        Command::EmbeddedChain(_) => commands::embedded_chain(&cfg)?,
        Command::Drift(_) => commands::drift(&cfg)?,
        Command::Harmonicity(_) => commands::harmonicity(&cfg)?,
        Command::DirichletCompare(_) => commands::dirichlet_compare(&cfg)?,
        Command::ExitTails(_) => commands::exit_tails(&cfg)?,
        Command::EvalKernel { kernel, point, .. } => commands::eval_kernel(&cfg, kernel, point)?,
        Command::SampleExits(_) => {
            let lines = commands::sample_exits(&cfg)?;
            let body = meta.comment_header("sample-exits") + &lines.join("\n") + "\n";
            match &common.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    output::write(&dir.join("exits.jsonl"), &body)?;
                }
                None => to_stdout(&body)?,
            }
            return Ok(true);
        }
    };
    emit(&report, &meta, common)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
