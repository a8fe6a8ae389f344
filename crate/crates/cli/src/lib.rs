//! The `capprop` command line: run capacity propagation studies from TOML
//! configs and write output bundles.
//!
//! Exit codes: 0 success, 1 invalid input (bad arguments, unreadable or
//! invalid config), 2 failure while computing or writing output.

pub mod bundle;
mod plot;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use capprop::experiments::{run_compare, run_study, CompareConfig, ExperimentConfig, ExperimentReport, RunOptions};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bundle::BundleOptions;

#[derive(Parser)]
#[command(name = "capprop", version, about = "Capacity propagation studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the study named in the config.
    Run(Common),
    /// Propagate one architecture and compare with its continuum solution.
    Compare(Common),
    /// Run a study and add fitted exponents and classifications to the table.
    Sweep(Common),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Report,
    Both,
}

#[derive(Args)]
struct Common {
    /// Config file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; created or updated only if the run succeeds.
    #[arg(long)]
    out: PathBuf,
    /// Seed; overrides the config's `seed`.
    #[arg(long, env = "CAPPROP_SEED")]
    seed: Option<u64>,
    /// Maximum concurrently running sweep points.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: u64,
    /// Skip SVG plots.
    #[arg(long)]
    no_plots: bool,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

impl From<capprop::Error> for Failure {
    fn from(e: capprop::Error) -> Self {
        if e.is_validation() {
            Failure::Invalid(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn read_config(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("config: cannot read {}: {e}", path.display())))
}

fn execute(command: &Command) -> Result<(ExperimentReport, &Common, bool), Failure> {
    let (args, sweep) = match command {
        Command::Run(a) | Command::Compare(a) => (a, false),
        Command::Sweep(a) => (a, true),
    };
    let text = read_config(&args.config)?;
    let report = match command {
        Command::Compare(_) => {
            let cfg = CompareConfig::from_toml_str(&text)?;
            let opts = RunOptions {
                seed: args.seed.or(cfg.seed).unwrap_or(0),
                jobs: args.jobs as usize,
            };
            run_compare(&cfg, &opts)?
        }
        _ => {
            let cfg = ExperimentConfig::from_toml_str(&text)?;
            let opts = RunOptions {
                seed: args.seed.or(cfg.seed).unwrap_or(0),
                jobs: args.jobs as usize,
            };
            run_study(&cfg, &opts)?
        }
    };
    Ok((report, args, sweep))
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let start = Instant::now();
    let (report, args, sweep) = match execute(&cli.command) {
        Ok(v) => v,
        Err(Failure::Invalid(msg)) => {
            eprintln!("capprop: invalid input: {msg}");
            return 1;
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("capprop: error: {msg}");
            return 2;
        }
    };
    let opts = BundleOptions {
        report: args.format != Format::Table,
        table: args.format != Format::Report,
        plots: !args.no_plots,
        with_fits: sweep,
    };
    let written = bundle::render(&report, opts).and_then(|files| {
        bundle::write_atomically(&args.out, &files)?;
        Ok(files.len())
    });
    match written {
        Ok(n) => {
            eprintln!(
                "capprop: {} with {} run(s): wrote {n} file(s) to {} in {:.2}s",
                report.study,
                report.records.len(),
                args.out.display(),
                start.elapsed().as_secs_f64()
            );
            0
        }
        Err(e) => {
            eprintln!("capprop: error: writing {}: {e}", args.out.display());
            2
        }
    }
}
