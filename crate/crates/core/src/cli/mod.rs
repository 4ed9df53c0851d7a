//! Command-line driver: one JSON config per run, CSV tables, and a JSON
//! sidecar carrying the resolved config next to every CSV written with
//! `--out`.

mod commands;
mod config;
mod table;

pub use commands::Output;
pub use config::{Geometry, Grid, RunConfig, SolverSettings};
pub use table::{Cell, Table};

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::JchError;

#[derive(Debug, Parser)]
#[command(name = "jch", version, about = "Three-level Jaynes-Cummings-Hubbard ground states")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration (or the JSON output of an earlier run).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// CSV destination; a `.json` sidecar with the resolved config is written beside it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Seed for eigensolver start vectors.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Lowest polariton energies `E_n` of one cavity over a β12 grid.
    SingleCavity,
    /// Density staircase ρ(μ) of a chain, or a CMFT μ-scan of a cluster.
    RhoMu,
    /// Correlation functions of a chain ground state.
    Correlations,
    /// Fidelity susceptibility along a κ grid.
    Fidelity,
    /// Self-consistent cluster solutions over κ and μ grids.
    CmftScan,
    /// Phase labels over κ and μ grids.
    PhaseDiagram,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SingleCavity => "single-cavity",
            Command::RhoMu => "rho-mu",
            Command::Correlations => "correlations",
            Command::Fidelity => "fidelity",
            Command::CmftScan => "cmft-scan",
            Command::PhaseDiagram => "phase-diagram",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Model(JchError),
    Io(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    /// 2 config, 3 non-convergence, 4 resource guard, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 1,
            CliError::Model(e) => match e {
                JchError::NotConverged(_) | JchError::OrthogonalStates { .. } => 3,
                JchError::ResourceGuard { .. } | JchError::BasisOverflow { .. } => 4,
                _ => 2,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Model(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<JchError> for CliError {
    fn from(e: JchError) -> Self {
        CliError::Model(e)
    }
}

/// Resolves and validates the configuration for `cli`.
pub fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path, cli.command)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.workers.is_some() {
        cfg.workers = cli.workers;
    }
    let cfg = cfg.resolve(cli.command);
    cfg.validate(cli.command)?;
    Ok(cfg)
}

pub fn execute(command: Command, cfg: &RunConfig) -> Result<Output, CliError> {
    let job = || match command {
        Command::SingleCavity => commands::single_cavity(cfg),
        Command::RhoMu => commands::rho_mu(cfg),
        Command::Correlations => commands::correlations(cfg),
        Command::Fidelity => commands::fidelity(cfg),
        Command::CmftScan => commands::cmft_scan(cfg),
        Command::PhaseDiagram => commands::phase_diagram(cfg),
    };
    match cfg.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Io(e.to_string()))?
            .install(job),
        None => job(),
    }
}

/// The JSON sidecar: command, resolved config, rows and summary.
pub fn document(command: Command, cfg: &RunConfig, output: &Output) -> serde_json::Value {
    json!({
        "command": command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "results": output.table.to_json(),
        "summary": output.summary,
    })
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

fn write_outputs(cli: &Cli, cfg: &RunConfig, output: &Output) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    match &cli.out {
        Some(path) => {
            let side = sidecar_path(path);
            if side == *path {
                return Err(CliError::config("`--out` must not end in .json; the sidecar takes that name"));
            }
            let file = std::fs::File::create(path).map_err(io)?;
            output
                .table
                .write_csv(std::io::BufWriter::new(file))
                .map_err(|e| CliError::Io(e.to_string()))?;
            let mut text = serde_json::to_string_pretty(&document(cli.command, cfg, output))
                .map_err(|e| CliError::Io(e.to_string()))?;
            text.push('\n');
            std::fs::write(&side, text).map_err(io)?;
        }
        None => {
            let stdout = std::io::stdout();
            output
                .table
                .write_csv(stdout.lock())
                .map_err(|e| CliError::Io(e.to_string()))?;
            stdout.lock().flush().map_err(io)?;
        }
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    let output = execute(cli.command, &cfg)?;
    write_outputs(cli, &cfg, &output)
}

/// Parses the process arguments, runs, and returns the exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("jch: {e}");
            e.exit_code()
        }
    }
}
