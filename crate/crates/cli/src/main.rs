use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use subac_cli::config::Command;
use subac_cli::{execute, Overrides};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sub {
    Simulate,
    Moments,
    Occupation,
    Recurrence,
    Ldp,
    Control,
    NoiseCheck,
    Selftest,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Simulate => Command::Simulate,
            Sub::Moments => Command::Moments,
            Sub::Occupation => Command::Occupation,
            Sub::Recurrence => Command::Recurrence,
            Sub::Ldp => Command::Ldp,
            Sub::Control => Command::Control,
            Sub::NoiseCheck => Command::NoiseCheck,
            Sub::Selftest => Command::Selftest,
        }
    }
}

/// Stochastic Allen-Cahn on the torus driven by subordinated Brownian noise.
#[derive(Debug, Parser)]
#[command(name = "subac", version)]
struct Cli {
    #[arg(value_enum)]
    command: Sub,
    /// Flat `key = value` config, or any CSV this tool wrote.
    config: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = Overrides {
        threads: cli.threads,
        out: cli.out,
        seed: cli.seed,
    };
    let code = execute(cli.command.into(), cli.config.as_deref(), &overrides);
    ExitCode::from(code as u8)
}
