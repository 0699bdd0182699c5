//! `ising`: experiment driver for the Ising model on random graphs.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::Status;
use config::ExperimentConfig;
use ising_core::verify::Fault;
use ising_core::LawSpec;
use output::OutputDir;

#[derive(Parser)]
#[command(name = "ising", version, about = "Cavity fixed points, thermodynamic limits and finite-size checks for the Ising model on random graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment configuration; flags below override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Sample configuration-model graphs and write edge lists.
    Generate,
    /// Solve the cavity fixed point and write pool checkpoints.
    FixedPoint,
    /// Tabulate phi, M, U, chi and C over the (beta, B) grid.
    ThermoSweep,
    /// Compare MCMC-integrated finite-n pressures with phi.
    Convergence,
    /// Run the inequality and consistency suites.
    Verify {
        /// Replace one suite's computation by a broken double.
        #[arg(long, value_enum)]
        inject_fault: Option<FaultArg>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    Gks,
    Ghs,
    BoundaryGap,
    Bracket,
}

impl From<FaultArg> for Fault {
    fn from(f: FaultArg) -> Self {
        match f {
            FaultArg::Gks => Fault::Gks,
            FaultArg::Ghs => Fault::Ghs,
            FaultArg::BoundaryGap => Fault::BoundaryGap,
            FaultArg::Bracket => Fault::Bracket,
        }
    }
}

#[derive(Args)]
struct Overrides {
    /// Degree law as JSON, e.g. '{"family":"poisson","params":{"lambda":3}}'.
    #[arg(long, global = true)]
    law: Option<String>,
    /// Comma-separated graph sizes.
    #[arg(long, global = true, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Comma-separated inverse temperatures.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    betas: Option<Vec<f64>>,
    /// Comma-separated external fields B.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    fields: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pool_size: Option<usize>,
    #[arg(long, global = true)]
    max_iterations: Option<usize>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    mc_samples: Option<usize>,
    #[arg(long, global = true)]
    sweeps: Option<usize>,
    #[arg(long, global = true)]
    burn_in: Option<usize>,
    #[arg(long, global = true)]
    replicas: Option<usize>,
    /// Skip chi and C in thermo-sweep.
    #[arg(long, global = true)]
    no_derivatives: bool,
}

fn effective_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let o = &cli.overrides;
    if let Some(law) = &o.law {
        cfg.law = serde_json::from_str::<LawSpec>(law).context("parsing --law")?;
    }
    macro_rules! set {
        ($($field:ident),*) => {
            $(if let Some(v) = o.$field.clone() { cfg.$field = v; })*
        };
    }
    set!(sizes, betas, fields, pool_size, max_iterations, tol, mc_samples, sweeps, burn_in, replicas);
    if o.no_derivatives {
        cfg.derivatives = false;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<Status> {
    if let Some(w) = cli.workers {
        anyhow::ensure!(w >= 1, "--workers must be at least 1");
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .context("configuring worker threads")?;
    }
    let cfg = effective_config(&cli)?;
    let out = OutputDir::create(&cfg.out, cfg.hash(), cfg.seed)?;
    out.write_json("config.json", &cfg)?;
    match cli.command {
        Command::Generate => commands::generate(&cfg, &out),
        Command::FixedPoint => commands::fixed_point(&cfg, &out),
        Command::ThermoSweep => commands::thermo_sweep(&cfg, &out),
        Command::Convergence => commands::convergence(&cfg, &out),
        Command::Verify { inject_fault } => commands::run_verify(&cfg, &out, inject_fault.map(Fault::from)),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::VerificationFailed) => ExitCode::from(2),
        Ok(Status::NotConverged) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
