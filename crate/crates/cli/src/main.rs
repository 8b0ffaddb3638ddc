mod config;
mod run;

use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ExperimentConfig, Flags, Mode};
use run::RunError;

#[derive(Debug, Parser)]
#[command(name = "xchan", version, about = "Alternating-CSIT scheme for the M×N SISO X channel")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Slot schedule and exact DoF accounting.
    Schedule(Flags),
    /// Per-receiver P/D/N table.
    CsitTable(Flags),
    /// Decode diagnostics per seed.
    Simulate(Flags),
    /// Ergodic sum rate over SNR and fitted DoF slope.
    Sweep(Flags),
    /// Full invariant suite.
    Verify(Flags),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let (mode, flags) = match &cli.command {
        Command::Schedule(f) => (Mode::Schedule, f),
        Command::CsitTable(f) => (Mode::CsitTable, f),
        Command::Simulate(f) => (Mode::Simulate, f),
        Command::Sweep(f) => (Mode::Sweep, f),
        Command::Verify(f) => (Mode::Verify, f),
    };
    let cfg = match ExperimentConfig::resolve(mode, flags) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("xchan: {e}");
            return ExitCode::from(2);
        }
    };
    let output = match run::execute(&cfg) {
        Ok(o) => o,
        Err(RunError::Invalid(msg)) => {
            eprintln!("xchan: invalid config: {msg}");
            return ExitCode::from(2);
        }
        Err(RunError::Failed(msg)) => {
            eprintln!("xchan: {msg}");
            return ExitCode::from(1);
        }
    };
    let written = match &cfg.out {
        Some(path) => run::write_atomic(path, &output.body)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => std::io::stdout().write_all(&output.body).map_err(|e| e.to_string()),
    };
    if let Err(msg) = written {
        eprintln!("xchan: {msg}");
        return ExitCode::from(2);
    }
    if let Some(note) = output.note {
        eprintln!("{note}");
    }
    if output.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
