//! Batch front end of `subac`: one subcommand per study, configured by a
//! flat `key = value` file and writing CSV tables.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;
pub mod selftest;

use std::path::{Path, PathBuf};

use commands::{Outcome, RunError, RunResult};
use config::{Command, RunConfig};

/// Command-line flags that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

pub fn resolve(cmd: Command, path: Option<&Path>, overrides: &Overrides) -> RunResult<RunConfig> {
    let mut cfg = RunConfig::load(cmd, path)?;
    if let Some(t) = overrides.threads {
        cfg.threads = t;
    }
    if let Some(o) = &overrides.out {
        cfg.out = o.clone();
    }
    if let Some(s) = overrides.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn dispatch(cmd: Command, cfg: &RunConfig) -> RunResult<Outcome> {
    match cmd {
        Command::Simulate => commands::simulate_cmd(cfg),
        Command::Moments => commands::moments_cmd(cfg),
        Command::Occupation => commands::occupation_cmd(cfg),
        Command::Recurrence => commands::recurrence_cmd(cfg),
        Command::Ldp => commands::ldp_cmd(cfg),
        Command::Control => commands::control_cmd(cfg),
        Command::NoiseCheck => commands::noise_check_cmd(cfg),
        Command::Selftest => Ok(selftest::selftest_cmd(cfg)),
    }
}

/// Runs `cmd` on a pool of `cfg.threads` workers and writes its tables.
/// Nothing is written when the study fails.
pub fn run(cmd: Command, cfg: &RunConfig) -> RunResult<(Vec<PathBuf>, Option<String>)> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| RunError::Io(std::io::Error::other(e)))?;
    let outcome = pool.install(|| dispatch(cmd, cfg))?;
    let paths = output::write_all(&cfg.out, cmd, cfg, &outcome.tables)?;
    Ok((paths, outcome.violation))
}

/// Full command-line behaviour; returns the process exit code.
pub fn execute(cmd: Command, path: Option<&Path>, overrides: &Overrides) -> i32 {
    let cfg = match resolve(cmd, path, overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    match run(cmd, &cfg) {
        Ok((paths, violation)) => {
            for p in &paths {
                println!("{}", p.display());
            }
            match violation {
                Some(v) => {
                    eprintln!("invariant violation: {v}");
                    4
                }
                None => 0,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
