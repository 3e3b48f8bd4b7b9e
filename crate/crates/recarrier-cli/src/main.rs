//! Experiment runner for the reusable-carrier state sharing simulator.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 when an
//! internal consistency check fails (non-CPTP channel reconstruction or a
//! failed self-check).

mod commands;
mod config;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Engine, ExperimentConfig, Format, Grid, NoiseKind};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Internal(String),
}

impl CliError {
    pub fn config(message: String) -> Self {
        CliError::Config(message)
    }

    pub fn io(error: std::io::Error) -> Self {
        CliError::Config(format!("io: {error}"))
    }

    pub fn from_library(error: recarrier::Error) -> Self {
        match error {
            recarrier::Error::ChannelConsistency { .. } => CliError::Internal(error.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "{m}"),
            CliError::Internal(m) => write!(f, "internal consistency: {m}"),
        }
    }
}

/// Simulate quantum state sharing over reusable entangled carriers.
#[derive(Parser)]
#[command(name = "recarrier", version, about)]
struct Cli {
    /// TOML config file with one section per subcommand; flags win.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a multi-round protocol; one row per round.
    Simulate(CommonArgs),
    /// Extract the complete-channel Pauli weights for both round kinds.
    Channel(CommonArgs),
    /// Tabulate channel weights over a grid of noise strengths.
    Sweep(CommonArgs),
    /// Logical error rates of the repetition code over a grid of q.
    Ecc(CommonArgs),
    /// Run the conjugation-identity and invariant self-checks.
    Check(CommonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Channel(_) => "channel",
            Command::Sweep(_) => "sweep",
            Command::Ecc(_) => "ecc",
            Command::Check(_) => "check",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Simulate(a)
            | Command::Channel(a)
            | Command::Sweep(a)
            | Command::Ecc(a)
            | Command::Check(a) => a,
        }
    }
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Noise family contaminating the carrier.
    #[arg(long, value_enum)]
    noise: Option<NoiseKind>,

    /// Noise strength in [0, 1].
    #[arg(long)]
    p: Option<f64>,

    /// Number of protocol rounds (simulate).
    #[arg(long)]
    rounds: Option<usize>,

    /// Number of receivers (2 or more).
    #[arg(long)]
    receivers: Option<usize>,

    /// Which engine produces channel estimates.
    #[arg(long, value_enum)]
    engine: Option<Engine>,

    /// Monte Carlo trials per estimate (pauliframe engine).
    #[arg(long)]
    trials: Option<usize>,

    /// Master seed for sampled execution.
    #[arg(long)]
    seed: Option<u64>,

    /// Grid start:stop:step for sweep and ecc.
    #[arg(long)]
    grid: Option<String>,

    /// Output path (default: stdout).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Output format.
    #[arg(long, value_enum)]
    format: Option<Format>,

    /// Kick sample table (three radian columns, optional weight column,
    /// header line required). Used with --noise kicks.
    #[arg(long, value_name = "PATH")]
    kicks_file: Option<PathBuf>,
}

impl CommonArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<(), CliError> {
        if let Some(noise) = self.noise {
            cfg.noise = noise;
        }
        if let Some(p) = self.p {
            cfg.p = p;
        }
        if let Some(rounds) = self.rounds {
            cfg.rounds = rounds;
        }
        if let Some(receivers) = self.receivers {
            cfg.receivers = receivers;
        }
        if let Some(engine) = self.engine {
            cfg.engine = engine;
        }
        if let Some(trials) = self.trials {
            cfg.trials = trials;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(grid) = &self.grid {
            cfg.grid = Grid::parse(grid)?;
        }
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        if let Some(format) = self.format {
            cfg.format = format;
        }
        if let Some(kicks) = &self.kicks_file {
            cfg.kicks_file = Some(kicks.clone());
        }
        Ok(())
    }
}

fn resolve_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path, cli.command.name())?;
    }
    cli.command.args().apply(&mut cfg)?;
    cfg.validate()?;
    Ok(cfg)
}

fn open_out(cfg: &ExperimentConfig) -> Result<Box<dyn Write>, CliError> {
    match &cfg.out {
        Some(path) => {
            let file = std::fs::File::create(path)
                .map_err(|e| CliError::config(format!("cannot create {}: {e}", path.display())))?;
            Ok(Box::new(std::io::BufWriter::new(file)))
        }
        None => Ok(Box::new(std::io::BufWriter::new(std::io::stdout()))),
    }
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let cfg = resolve_config(cli)?;
    let mut out = open_out(&cfg)?;
    let ok = match &cli.command {
        Command::Simulate(_) => {
            commands::cmd_simulate(&cfg, &mut out)?;
            true
        }
        Command::Channel(_) => {
            commands::cmd_channel(&cfg, &mut out)?;
            true
        }
        Command::Sweep(_) => {
            commands::cmd_sweep(&cfg, &mut out)?;
            true
        }
        Command::Ecc(_) => {
            commands::cmd_ecc(&cfg, &mut out)?;
            true
        }
        Command::Check(_) => commands::cmd_check(&cfg, &mut out)?,
    };
    out.flush().map_err(CliError::io)?;
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(error.exit_code())
        }
    }
}
