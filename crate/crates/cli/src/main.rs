//! `homog1d` — effective constants, correctors, fine and averaged solvers,
//! and ε-convergence studies for 1D periodic media, driven by a small
//! key=value config file plus command-line overrides.

mod commands;
mod config;
mod plot;
mod scale;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "homog1d",
    about = "Homogenization toolkit for 1D periodic media",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the key=value config file
    #[arg(long)]
    config: PathBuf,
    /// Scale ratio, as `1/16` or a decimal; replaces the config's epsilon
    #[arg(long)]
    epsilon: Option<String>,
    /// Output directory; replaces the config's output_dir
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace one config entry, e.g. --override cfl=0.3 (repeatable)
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Accept epsilon >= 1 from a [dimensional] block (warns instead of failing)
    #[arg(long)]
    allow_large_epsilon: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Print the averaged density, the effective coefficient, and the
    /// self-consistency residual of the averaging
    Effective(CommonArgs),
    /// Build the cell corrector table and write it as CSV
    Corrector(CommonArgs),
    /// Run the heterogeneous solver at one epsilon and write snapshots
    SolveFine(CommonArgs),
    /// Run the averaged constant-coefficient solver and write snapshots
    SolveHomog(CommonArgs),
    /// Sweep epsilon and write the convergence report with fitted rates
    Converge(CommonArgs),
    /// Compare one fine run against the plain and corrector-dressed
    /// averaged solution
    Compare(CommonArgs),
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Effective(a)
            | Command::Corrector(a)
            | Command::SolveFine(a)
            | Command::SolveHomog(a)
            | Command::Converge(a)
            | Command::Compare(a) => a,
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let args = cli.command.common();
    let config = RunConfig::load(&args.config)?.apply_overrides(&args.overrides)?;
    let out = args.out.clone().unwrap_or_else(|| config.output_dir.clone());
    let eps = args.epsilon.as_deref();
    let allow = args.allow_large_epsilon;
    match &cli.command {
        Command::Effective(_) => commands::effective(&config),
        Command::Corrector(_) => commands::corrector(&config, &out),
        Command::SolveFine(_) => commands::solve_fine(&config, eps, &out, allow),
        Command::SolveHomog(_) => commands::solve_homog(&config, eps, &out, allow),
        Command::Converge(_) => commands::converge(&config, eps, &out, allow),
        Command::Compare(_) => commands::compare(&config, eps, &out, allow),
    }
}

fn main() -> ExitCode {
    // behave like any other unix filter when stdout is a closed pipe
    // (e.g. `homog1d solve-fine ... | head`), instead of panicking on EPIPE
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
