//! `icse-kit`: batch front end for inequality constrained shrinkage estimation.

mod commands;
mod config;
mod data;
mod error;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "icse-kit", version, about = "Inequality constrained shrinkage estimation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the shrinkage estimator to a data set and report every diagnostic
    Fit(Common),
    /// Run the Monte Carlo comparison of the five estimators
    McStudy(Common),
    /// Simulate the asymptotic limit: pattern laws, risk over a τ grid, dominance check
    LimitSim(Common),
    /// Estimate sign-pattern probabilities of a multivariate normal
    Orthant(Common),
    /// Fit the truncated-prior empirical Bayes estimator to a data set
    Eb(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config file with a section per subcommand
    #[arg(long)]
    config: Option<PathBuf>,
    /// Random seed (overrides the config)
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this
    #[arg(long)]
    threads: Option<usize>,
    /// Output CSV path (standard output when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Config override such as `mc-study.replications=500`; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn run(cli: Cli) -> CliResult<()> {
    let (common, name) = match &cli.command {
        Command::Fit(c) => (c, "fit"),
        Command::McStudy(c) => (c, "mc-study"),
        Command::LimitSim(c) => (c, "limit-sim"),
        Command::Orthant(c) => (c, "orthant"),
        Command::Eb(c) => (c, "eb"),
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::config("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(e.to_string()))?;
    }
    let cfg = config::load(common.config.as_deref(), &common.overrides)?;
    let seed = |section: Option<u64>| config::resolve_seed(common.seed, section, cfg.seed);
    let bytes = match name {
        "fit" => commands::fit(&cfg.fit, seed(cfg.fit.seed)?)?,
        "mc-study" => commands::mc_study(&cfg.mc_study, seed(cfg.mc_study.seed)?)?,
        "limit-sim" => commands::limit_sim(&cfg.limit_sim, seed(cfg.limit_sim.seed)?)?,
        "orthant" => commands::orthant(&cfg.orthant, seed(cfg.orthant.seed)?)?,
        _ => commands::eb(&cfg.eb, seed(cfg.eb.seed)?)?,
    };
    match &common.out {
        Some(path) => std::fs::write(path, &bytes)
            .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(&bytes)
            .map_err(|e| CliError::config(format!("cannot write output: {e}"))),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("icse-kit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
