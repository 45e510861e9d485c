//! `superrep`: phase-gate replication sweeps, optics scans and simulated
//! process tomography.

mod commands;
mod config;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{PhaseGrid, Preset, RunConfig, SCHEMA_HINT};

pub const OUT_DIR_ENV: &str = "SUPERREP_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "superrep-out";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "superrep", version, about, after_help = SCHEMA_HINT)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fidelity of the 1→2 replication protocol against φ, with baselines.
    Replicate(Common),
    /// Worst-case fidelity of N→M superreplication for M = ⌊N^(2−α)⌋.
    Superrep(SuperrepArgs),
    /// Simulated process tomography of the optical experiment.
    Tomo(Common),
    /// Single-parameter imperfection sweeps of the optical gate.
    OpticsScan(ScanArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [default: $SUPERREP_OUT_DIR, else ./superrep-out].
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Phase count (uniform over one period) or a list such as `0,pi/2,pi`.
    #[arg(long, value_parser = PhaseGrid::parse)]
    phases: Option<PhaseGrid>,
    /// Expected counts per (input, setting) at the design point.
    #[arg(long)]
    rate: Option<f64>,
    /// Monte Carlo trials per phase (0 disables error bars).
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Also write SVG figures.
    #[arg(long)]
    svg: bool,
}

#[derive(Args, Debug)]
struct SuperrepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    alpha: Option<f64>,
    /// Comma-separated copy numbers N.
    #[arg(long, value_delimiter = ',')]
    copies: Option<Vec<usize>>,
}

#[derive(Args, Debug)]
struct ScanArgs {
    #[command(flatten)]
    common: Common,
    /// r_v, r_h, visibility or phase_jitter; all four when omitted.
    #[arg(long)]
    parameter: Option<String>,
}

fn resolve(common: &Common) -> Result<RunConfig, CliError> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(phases) = &common.phases {
        config.phases = phases.clone();
    }
    if let Some(rate) = common.rate {
        config.tomo.rate = rate;
    }
    if let Some(trials) = common.trials {
        config.tomo.trials = trials;
    }
    if let Some(preset) = common.preset {
        config.optics.preset = preset;
    }
    if common.svg {
        config.svg = true;
    }
    if let Some(dir) = &common.out_dir {
        config.out_dir = Some(dir.clone());
    }
    Ok(config)
}

fn out_dir(config: &RunConfig) -> PathBuf {
    config
        .out_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (config, result) = match cli.command {
        Command::Replicate(common) => {
            let config = resolve(&common)?;
            config.validate()?;
            let r = commands::replicate(&config)?;
            (config, r)
        }
        Command::Superrep(args) => {
            let mut config = resolve(&args.common)?;
            if let Some(alpha) = args.alpha {
                config.superrep.alpha = alpha;
            }
            if let Some(copies) = args.copies {
                config.superrep.copies = copies;
                config.superrep.pairs = None;
            }
            config.validate()?;
            let r = commands::superrep(&config)?;
            (config, r)
        }
        Command::Tomo(common) => {
            let config = resolve(&common)?;
            config.validate()?;
            let r = commands::tomo(&config)?;
            (config, r)
        }
        Command::OpticsScan(args) => {
            let mut config = resolve(&args.common)?;
            if let Some(name) = args.parameter {
                let parameter = serde_json::from_value(serde_json::Value::String(name.clone()))
                    .map_err(|_| {
                        CliError::Validation(format!(
                            "unknown scan parameter '{name}' (r_v, r_h, visibility, phase_jitter)"
                        ))
                    })?;
                config.scan.parameter = Some(parameter);
            }
            config.validate()?;
            let r = commands::optics_scan(&config)?;
            (config, r)
        }
    };
    let dir = out_dir(&config);
    for line in &result.summary {
        println!("{line}");
    }
    for path in result.outputs.commit(&dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Validation(_)) {
                eprintln!("\n{SCHEMA_HINT}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
