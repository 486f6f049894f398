//! `leeyang`: exact Ising spectra, Lee-Yang zeros and limit-law diagnostics from the shell.

mod args;
mod commands;
mod system;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::Parser;
use leeyang::io::RunManifest;

use args::Cli;

/// Exit status for failures that more precision bits would fix.
const EXIT_ESCALATION: u8 = 2;
const EXIT_INVALID: u8 = 3;

/// Raised for argument combinations clap cannot express.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// What a command produced, for the manifest.
#[derive(Debug, Default)]
pub struct Outcome {
    pub inputs: Vec<String>,
    pub outputs: Vec<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_INVALID;
        }
        if let Some(e) = cause.downcast_ref::<leeyang::Error>() {
            use leeyang::Error as E;
            return match e {
                e if e.needs_escalation() => EXIT_ESCALATION,
                E::InvalidParameter(_)
                | E::LengthMismatch { .. }
                | E::IndexOverflow { .. }
                | E::BruteForceCap { .. }
                | E::UnsupportedLattice(_) => EXIT_INVALID,
                _ => 1,
            };
        }
    }
    1
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(t) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the worker pool")?;
    }
    std::fs::create_dir_all(&cli.global.out).with_context(|| format!("creating {}", cli.global.out.display()))?;
    let started = Instant::now();
    let mut manifest = RunManifest::new(cli.command.name());
    for (k, v) in args::echo(&cli)? {
        manifest.param(&k, v);
    }
    let outcome = commands::dispatch(&cli.global, &cli.command)?;
    manifest.inputs = outcome.inputs;
    manifest.outputs = outcome.outputs.iter().map(|p| p.display().to_string()).collect();
    manifest.wall_time_s = started.elapsed().as_secs_f64();
    manifest.append_to(&cli.global.out.join("manifests.jsonl"))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INVALID) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
