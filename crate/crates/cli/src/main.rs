use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use slowfast_cli::config::ExperimentConfig;
use slowfast_cli::{init_workers, report, run, CliError, WORKERS_ENV};

/// Slow/fast homogenisation experiments.
#[derive(Parser)]
#[command(version, about, after_help = format!("The worker count is read from {WORKERS_ENV}."))]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write CSV, summary.json and manifest.json.
    Run {
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Draw SVG figures next to the outputs listed in a manifest.
    Report { manifest: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<u8, CliError> {
    init_workers()?;
    match cmd {
        Command::Run { config, output } => {
            let cfg = ExperimentConfig::load(&config)?;
            let res = run(&cfg, output.as_deref())?;
            for c in &res.summary.checks {
                println!("{} {} value={:e} target={:e} tol={:e}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.target, c.tolerance);
            }
            println!("{}: {} ({})", cfg.name, if res.summary.passed { "passed" } else { "failed" }, res.manifest_path.display());
            Ok(if res.summary.passed { 0 } else { 1 })
        }
        Command::Report { manifest } => {
            for p in report::report(&manifest)? {
                println!("{}", p.display());
            }
            Ok(0)
        }
    }
}
