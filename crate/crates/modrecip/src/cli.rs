//! Command-line front end.
//!
//! Exit status: 0 when every row passes, 1 when some row fails its
//! tolerance or a solve did not certify, 2 for usage and configuration
//! errors, 3 for I/O and solver errors.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use crate::config::{Config, Experiment};
use crate::experiments::run;

pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "modrecip", version, about = "Discrete modulus and reciprocity experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one modulus problem on the configured grid.
    Modulus(RunArgs),
    /// Check the reciprocity product over `experiment.norms` x `experiment.p_sweep`.
    Reciprocity(RunArgs),
    /// Crossing modulus of the linf unit square over `experiment.n_sweep`, against pi/4.
    Sharpness(RunArgs),
    /// Coarea ratio of the chain potential over `experiment.n_sweep`.
    Coarea(RunArgs),
    /// Crossing modulus of a constant-weight rectangle over `experiment.n_sweep`.
    Convergence(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Where to write the JSON report; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized inputs.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 uses one per core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Also write the rows as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

impl Command {
    fn split(self) -> (Experiment, RunArgs) {
        match self {
            Command::Modulus(a) => (Experiment::Modulus, a),
            Command::Reciprocity(a) => (Experiment::Reciprocity, a),
            Command::Sharpness(a) => (Experiment::Sharpness, a),
            Command::Coarea(a) => (Experiment::Coarea, a),
            Command::Convergence(a) => (Experiment::Convergence, a),
        }
    }
}

fn command() -> clap::Command {
    let defaults = format!(
        "Configuration defaults (experiment.tolerance falls back to a per-experiment value):\n\n{}",
        Config::defaults_toml()
    );
    let mut cmd = Cli::command().after_long_help(defaults.clone());
    let names: Vec<String> = cmd.get_subcommands().map(|c| c.get_name().to_string()).collect();
    for name in names {
        let text = defaults.clone();
        cmd = cmd.mut_subcommand(name, |c| c.after_long_help(text));
    }
    cmd
}

pub fn main() -> i32 {
    main_from(std::env::args_os())
}

pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match command()
        .try_get_matches_from(args)
        .and_then(|m| Cli::from_arg_matches(&m))
    {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    let (experiment, args) = cli.command.split();
    let started = Instant::now();
    let result = Config::load(&args.config).and_then(|cfg| run(cfg, experiment, args.seed, args.workers));
    let report = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("modrecip: {e}");
            return if e.is_usage() { EXIT_USAGE } else { EXIT_RUNTIME };
        }
    };
    let written = match &args.out {
        Some(path) => report.write_json(path),
        None => std::io::stdout()
            .write_all(report.to_json().as_bytes())
            .map_err(|source| crate::HarnessError::Io {
                path: "<stdout>".into(),
                source,
            }),
    }
    .and_then(|()| match &args.csv {
        Some(path) => report.write_csv(path),
        None => Ok(()),
    });
    if let Err(e) = written {
        eprintln!("modrecip: {e}");
        return EXIT_RUNTIME;
    }
    let passed = report.rows.iter().filter(|r| r.pass).count();
    eprintln!(
        "{experiment}: {passed}/{} rows passed in {:.2} s",
        report.rows.len(),
        started.elapsed().as_secs_f64()
    );
    if report.passed {
        0
    } else {
        EXIT_FAILED
    }
}
