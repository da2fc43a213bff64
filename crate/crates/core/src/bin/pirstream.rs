use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pirstream::config::ExperimentConfig;
use pirstream::runner::{cmd_privacy_audit, cmd_rates, cmd_recovering_search, cmd_simulate, RunError, RunOptions};

#[derive(Parser, Debug)]
#[command(name = "pirstream", version, about = "Streaming private retrieval from coded storage")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run end-to-end trials and compare the decoded file with the stored one.
    Simulate(Common),
    /// Emit the rate and upper-bound sweeps as CSV.
    Rates(Common),
    /// Estimate how often random locator sets give a full-rank recovering matrix.
    RecoveringSearch(Common),
    /// Compare the exact colluding-server view distributions across files.
    PrivacyAudit(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads (0 = all cores, 1 = sequential).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(common: &Common, required: bool) -> Result<ExperimentConfig, RunError> {
    match &common.config {
        Some(path) => Ok(ExperimentConfig::load(path)?),
        None if required => Err(RunError::Setup("--config is required for this command".into())),
        None => Ok("".parse()?),
    }
}

fn emit(out: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> Result<(), csv::Error>) -> Result<(), RunError> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            write(&mut w)?;
            w.flush()?;
        }
        None => write(&mut io::stdout().lock())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), RunError> {
    let (common, required) = match &cli.command {
        Command::Rates(c) => (c, false),
        Command::Simulate(c) | Command::RecoveringSearch(c) | Command::PrivacyAudit(c) => (c, true),
    };
    let cfg = load(common, required)?;
    let opts = RunOptions { seed: common.seed, trials: common.trials, workers: common.workers };
    let out = common.out.as_deref();
    match cli.command {
        Command::Simulate(_) => {
            let report = cmd_simulate(&cfg, &opts)?;
            emit(out, |w| report.write_csv(w))?;
            eprint!("{}", report.summary());
            report.check()
        }
        Command::Rates(_) => {
            let report = cmd_rates(&cfg)?;
            emit(out, |w| report.write_csv(w))?;
            eprint!("{}", report.summary());
            Ok(())
        }
        Command::RecoveringSearch(_) => {
            let report = cmd_recovering_search(&cfg, &opts)?;
            emit(out, |w| report.write_csv(w))?;
            eprint!("{}", report.summary());
            report.check()
        }
        Command::PrivacyAudit(_) => {
            let report = cmd_privacy_audit(&cfg)?;
            emit(out, |w| report.write_csv(w))?;
            eprint!("{}", report.summary());
            report.check()
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
