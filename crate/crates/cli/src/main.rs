//! Command-line scenario runner.

mod config;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use run::{run_scenario, Failure, Overrides};

#[derive(Parser)]
#[command(name = "gelfand", version, about = "Bubbling solutions of -Δw = ε² h e^w: scenarios from a JSON config")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Green function and regular part tables.
    Green(Common),
    /// Critical points of the m-vortex Hamiltonian.
    Crit(Common),
    /// Newton solve from a bubble ansatz.
    Solve(Common),
    /// Continuation in the peak height.
    Continue(Common),
    /// Continuation with per-point diagnostics.
    Diagnose(Common),
    /// Uniqueness probe at fixed ε.
    Probe(Common),
    /// Diagnostics over a δ sweep.
    Sweep(Common),
    /// Every task in the config.
    Run(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Grid nodes along the longer side; overrides the config.
    #[arg(long)]
    grid: Option<usize>,
    /// Newton tolerance; overrides the config.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, c) = match cli.command {
        Command::Green(c) => (Some("green-table"), c),
        Command::Crit(c) => (Some("critical-points"), c),
        Command::Solve(c) => (Some("solve"), c),
        Command::Continue(c) => (Some("continue"), c),
        Command::Diagnose(c) => (Some("diagnose"), c),
        Command::Probe(c) => (Some("uniqueness-probe"), c),
        Command::Sweep(c) => (Some("sweep"), c),
        Command::Run(c) => (None, c),
    };
    if let Some(k) = c.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let text = match std::fs::read_to_string(&c.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", c.config.display());
            return ExitCode::from(2);
        }
    };
    let ov = Overrides { grid: c.grid, tol: c.tol, threads: c.threads };
    match run_scenario(&text, kind, c.out, &ov) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let tag = match e {
                Failure::Schema(_) => "invalid config",
                Failure::Convergence(_) => "no convergence",
                Failure::Internal(_) => "error",
            };
            eprintln!("{tag}: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
