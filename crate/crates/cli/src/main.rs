// SPDX-License-Identifier: Apache-2.0

mod commands;
mod config;
mod output;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tvcert::certify::{Mode, Variant};

use crate::config::{exit_code, ConfigError};

#[derive(Parser, Debug)]
#[command(name = "tvcert", version, about = "Total-variation certificates from weak-metric bounds")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Seed for every Monte-Carlo stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads: a positive number or "auto".
    #[arg(long, global = true, env = "TVCERT_THREADS", default_value = "auto")]
    pub threads: String,
    /// Output file (JSON report or CSV series); stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Constants chain: paper (as printed) or tight.
    #[arg(long, global = true, default_value = "paper")]
    pub mode: Mode,
    /// Weak metric the input distance refers to: fm, cf or dk:<k>.
    #[arg(long, global = true, default_value = "fm")]
    pub variant: Variant,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certify a TV and sup-density bound for a pair of laws.
    Certify(commands::CertifyArgs),
    /// Grid and Fourier distances between two laws.
    Metrics(commands::MetricsArgs),
    /// Simulate a contractive recursion and tabulate its TV decay.
    Dynsys(commands::DynsysArgs),
    /// Distance of normalized sums to the standard Gaussian.
    Clt(commands::CltArgs),
    /// Dominated-convergence check for a built-in CF sequence.
    CheckDominated(commands::DominatedArgs),
}

fn threads(spec: &str) -> anyhow::Result<usize> {
    if spec == "auto" {
        return Ok(0);
    }
    match spec.parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(ConfigError::new(format!("--threads: expected a positive integer or \"auto\", got {spec:?}")).into()),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let n = threads(&cli.global.threads)?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    match cli.command {
        Command::Certify(a) => commands::certify(&cli.global, &a),
        Command::Metrics(a) => commands::metrics(&cli.global, &a),
        Command::Dynsys(a) => commands::dynsys(&cli.global, &a),
        Command::Clt(a) => commands::clt(&cli.global, &a),
        Command::CheckDominated(a) => commands::check_dominated(&cli.global, &a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, tag) = exit_code(&e);
            eprintln!("error[{tag}]: {e:#}");
            ExitCode::from(code)
        }
    }
}
