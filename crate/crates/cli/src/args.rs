use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rwre::config::{DirectionSpec, HorizonSpec, LawSpec, RunConfig, SeedSpec};

#[derive(Debug, Parser)]
#[command(name = "rwre", version, about = "Monte-Carlo estimation of homogenized conductivities via random walks in random conductance environments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print one estimate row per horizon to standard output.
    Estimate(RunArgs),
    /// Systematic-error sweep over horizons; writes sweep.csv and fit.json.
    Sweep(RunArgs),
    /// Histograms of rescaled fluctuations; writes fluct.csv.
    Fluctuations(RunArgs),
    /// Heat-kernel tails, exponential moments and p̂ concentration; writes diag.json.
    Diagnostics(RunArgs),
    /// Compare walks in one fixed environment against the exact kernel.
    OracleCheck(RunArgs),
}

impl Command {
    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Estimate(a)
            | Command::Sweep(a)
            | Command::Fluctuations(a)
            | Command::Diagnostics(a)
            | Command::OracleCheck(a) => a,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Estimate(_) => "estimate",
            Command::Sweep(_) => "sweep",
            Command::Fluctuations(_) => "fluctuations",
            Command::Diagnostics(_) => "diagnostics",
            Command::OracleCheck(_) => "oracle-check",
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON file with the same keys as the flags; flags take precedence.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Conductance law: two_point:α,β,p | uniform:α,β | constant:c, `;` between per-axis laws.
    #[arg(long)]
    pub law: Option<String>,
    /// Lattice dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Horizon or comma-separated horizons.
    #[arg(long)]
    pub t: Option<String>,
    /// Walks per estimate, overriding K(t)·t².
    #[arg(long)]
    pub n: Option<u64>,
    /// Replication factor K(t) applied to every horizon.
    #[arg(long)]
    pub k: Option<f64>,
    /// Direction ξ, comma-separated; normalized on input.
    #[arg(long)]
    pub xi: Option<String>,
    /// Master seed (decimal or 0x-hex). Falls back to RWRE_SEED.
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Refuse to start if the projected number of random draws exceeds this.
    #[arg(long)]
    pub budget_draws: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Multiplier applied to the replication factors.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Use the reference horizon and K(t) schedule; --t selects a subset.
    #[arg(long)]
    pub table1: bool,
    /// Independent estimates per horizon (fluctuations).
    #[arg(long)]
    pub repetitions: Option<u64>,
    /// Exponential-moment parameter (diagnostics).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Walk to simulate for `estimate`: discrete or continuous.
    #[arg(long)]
    pub process: Option<String>,
}

impl RunArgs {
    pub fn to_config(&self) -> RunConfig {
        RunConfig {
            law: self.law.clone().map(LawSpec::Text),
            d: self.d,
            t: self.t.clone().map(HorizonSpec::Text),
            n: self.n,
            k: self.k,
            xi: self.xi.clone().map(DirectionSpec::Text),
            seed: self.seed.clone().map(SeedSpec::Text),
            workers: self.workers,
            budget_draws: self.budget_draws,
            out_dir: self.out_dir.clone(),
            scale: self.scale,
            table1: self.table1.then_some(true),
            repetitions: self.repetitions,
            lambda: self.lambda,
            process: self.process.clone(),
        }
    }
}
