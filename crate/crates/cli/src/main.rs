mod commands;
mod config;
mod error;
mod manifest;

use std::path::{Path, PathBuf};

use clap::{ArgGroup, Parser, Subcommand};
use twinbeam_core::Regime;

use commands::{Context, NoiseArgs, Strength, Vary};
use config::{Grid, SimulatorConfig};
use error::CliError;

/// Seeded four-wave-mixing twin-beam simulator.
///
/// Exit codes: 0 success, 1 failed check, 2 I/O error, 3 domain or regime
/// error, 4 Fock truncation error. Set RAYON_NUM_THREADS to limit threads.
#[derive(Parser)]
#[command(name = "twinbeam", version)]
struct Cli {
    /// Config file of `key = value` lines; defaults apply to missing keys
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Seed-frequency sweep at one pump setting
    Trace {
        /// Pump detuning from f32, Hz
        #[arg(long, allow_hyphen_values = true)]
        pump_detuning: Option<f64>,
        /// Pump power, W
        #[arg(long)]
        pump_power: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Intensity map over pump detuning and seed detuning
    Map {
        /// Pump detunings from f32 as start:stop:n, Hz
        #[arg(long, allow_hyphen_values = true, default_value = "-3e9:3e9:50")]
        pump_grid: Grid,
        #[arg(long)]
        out: PathBuf,
    },
    /// Noise-reduction factor: closed form, large-seed limit and Monte Carlo
    #[command(group(ArgGroup::new("strength").required(true).args(["gain", "r"])))]
    Noise {
        #[arg(long)]
        gain: Option<f64>,
        /// Squeeze strength
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        eta: Option<f64>,
        /// Mean seed photon number
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        shots: Option<usize>,
        /// fock-exact or gaussian-approx
        #[arg(long)]
        regime: Option<Regime>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the sampled (n1, n2) pairs as CSV
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Gain against cell temperature or pump power
    GainStudy {
        #[arg(long, value_enum)]
        vary: Vary,
        /// start:stop:n in K or W
        #[arg(long, allow_hyphen_values = true)]
        range: Grid,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fock-space oracle against the closed forms on a fixed grid
    OracleCheck,
}

fn load_config(path: Option<&Path>) -> Result<(SimulatorConfig, String), CliError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?,
        None => String::new(),
    };
    Ok((SimulatorConfig::parse(&text)?, text))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (config, text) = load_config(cli.config.as_deref())?;
    let mut args = std::env::args();
    args.next();
    let command_line = std::iter::once("twinbeam".to_string())
        .chain(args)
        .collect::<Vec<_>>()
        .join(" ");
    let ctx = Context {
        config,
        text,
        command_line,
    };
    match cli.command {
        Command::Trace {
            pump_detuning,
            pump_power,
            out,
        } => commands::trace(&ctx, pump_detuning, pump_power, &out),
        Command::Map { pump_grid, out } => commands::map(&ctx, pump_grid, &out),
        Command::Noise {
            gain,
            r,
            eta,
            mu,
            shots,
            regime,
            seed,
            dump,
        } => {
            let strength = match (gain, r) {
                (Some(g), None) => Strength::Gain(g),
                (None, Some(r)) => Strength::R(r),
                _ => return Err(CliError::Domain("give exactly one of --gain or --r".into())),
            };
            commands::noise(
                &ctx,
                NoiseArgs {
                    strength,
                    eta,
                    mu,
                    shots,
                    regime,
                    seed,
                    dump: dump.as_deref(),
                },
            )
        }
        Command::GainStudy { vary, range, out } => commands::gain_study(&ctx, vary, range, &out),
        Command::OracleCheck => commands::oracle_check(&ctx),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
