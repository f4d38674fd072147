use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use sisgraphon_cli::config::{load_config, Experiment};
use sisgraphon_cli::run::run;

#[derive(Parser)]
#[command(name = "sisgraphon", version, about = "SIS epidemics on graphons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override a configuration value, e.g. `--set params.beta=2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Directory that `output_dir` is resolved against.
    #[arg(long, env = "SISGRAPHON_OUTPUT_ROOT", default_value = ".")]
    output_root: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in the configuration.
    Run(Common),
    /// Integrate one trajectory.
    Simulate(Common),
    /// Leading eigenpair and spectral gap.
    Spectrum(Common),
    /// Endemic equilibrium.
    Endemic(Common),
    /// Align a family of small initial conditions.
    UsicAlign(Common),
    /// Approximate the eternal solution.
    Eternal(Common),
    /// Closed-form SI solution on a rank-1 kernel.
    SiExact(Common),
    /// SI links against prevalence.
    ChiCurve(Common),
    /// Check the linearisation, envelope and Lyapunov bounds.
    VerifyBounds(Common),
}

fn execute(cli: Cli) -> Result<bool> {
    let (requested, common) = match cli.command {
        Command::Run(c) => (None, c),
        Command::Simulate(c) => (Some(Experiment::Simulate), c),
        Command::Spectrum(c) => (Some(Experiment::Spectrum), c),
        Command::Endemic(c) => (Some(Experiment::Endemic), c),
        Command::UsicAlign(c) => (Some(Experiment::UsicAlign), c),
        Command::Eternal(c) => (Some(Experiment::Eternal), c),
        Command::SiExact(c) => (Some(Experiment::SiExact), c),
        Command::ChiCurve(c) => (Some(Experiment::ChiCurve), c),
        Command::VerifyBounds(c) => (Some(Experiment::VerifyBounds), c),
    };
    let cfg = load_config(&common.config, &common.overrides)?;
    let experiment = match (requested, cfg.experiment) {
        (Some(r), Some(c)) if r != c => {
            bail!("subcommand '{r}' does not match experiment '{c}' in the configuration")
        }
        (Some(r), _) => r,
        (None, Some(c)) => c,
        (None, None) => bail!("the configuration names no experiment; use a subcommand"),
    };
    let outcome = run(&cfg, experiment, &common.output_root)?;
    for c in &outcome.checks {
        eprintln!(
            "{:<6} {} (measured {:.3e}, bound {:.3e})",
            if c.passed { "ok" } else { "FAILED" },
            c.name,
            c.measured,
            c.bound
        );
    }
    eprintln!("wrote {}", outcome.dir.display());
    Ok(outcome.passed())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").trim_end());
            ExitCode::FAILURE
        }
    }
}
