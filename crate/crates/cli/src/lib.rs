//! Command-line front end: evaluate ψ(p, t), tabulate resonance poles,
//! regenerate the reference figures as data and compare against the
//! finite-difference oracle.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::config::{ConfigError, Format, PoleCount, Settings};

/// Exit status for invalid usage or configuration.
pub const EXIT_USAGE: i32 = 2;
/// Exit status for numerical failures.
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Numerical(String),
    #[error("cannot write output: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Output(_) => EXIT_USAGE,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    pub fn numerical(err: impl std::fmt::Display) -> Self {
        CliError::Numerical(err.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "wavepacket", version, about = "Gaussian wave packet scattering off a square barrier")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate psi(p, t) on a momentum grid.
    Psi {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        window: WindowArgs,
        #[command(flatten)]
        terms: TermArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Tabulate the resonance poles of the barrier.
    Poles {
        #[command(flatten)]
        params: ParamArgs,
        /// Highest seed index to continue.
        #[arg(long)]
        n_max: Option<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Write the exact and approximate curves of a reference figure.
    Figure {
        /// fig1, fig2 or fig3.
        name: String,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        window: WindowArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Compare exact-mode psi with a converged Crank-Nicolson run.
    Compare {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        window: WindowArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
}

/// Physical parameters. Unset values come from the config file, then from
/// the preset.
#[derive(Debug, Clone, Default, Args)]
pub struct ParamArgs {
    /// Preset supplying defaults: fig1, fig2 or fig3.
    #[arg(long)]
    pub preset: Option<String>,
    /// File of key=value lines using the flag names as keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Barrier height (negative for a well).
    #[arg(long = "V0", allow_negative_numbers = true)]
    pub v0: Option<f64>,
    /// Barrier width.
    #[arg(long, allow_negative_numbers = true)]
    pub d: Option<f64>,
    /// Particle mass.
    #[arg(long, allow_negative_numbers = true)]
    pub m: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub hbar: Option<f64>,
    /// Initial packet centre.
    #[arg(long, allow_negative_numbers = true)]
    pub xc: Option<f64>,
    /// Mean momentum.
    #[arg(long, allow_negative_numbers = true)]
    pub pc: Option<f64>,
    /// Coordinate variance parameter of the packet.
    #[arg(long, allow_negative_numbers = true)]
    pub deltax: Option<f64>,
    /// Evaluation time.
    #[arg(long, allow_negative_numbers = true)]
    pub t: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct WindowArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub p_lo: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub p_hi: Option<f64>,
    #[arg(long)]
    pub n_points: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TermArgs {
    /// Resonance poles to extract: auto, all, or the number of seeds.
    #[arg(long)]
    pub n_poles: Option<PoleCount>,
    /// Number of correction terms (0 drops the correction).
    #[arg(long)]
    pub n_corrections: Option<usize>,
    /// Add |term|^2 columns for every contribution.
    #[arg(long)]
    pub breakdown: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct OutputArgs {
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

/// Crank-Nicolson grid of `compare`.
#[derive(Debug, Clone, Default, Args)]
pub struct GridArgs {
    /// Half-width of the position box.
    #[arg(long)]
    pub half_width: Option<f64>,
    /// Points of the coarsest grid (a power of two).
    #[arg(long)]
    pub n_x: Option<usize>,
    /// Time steps of the coarsest grid.
    #[arg(long)]
    pub n_t: Option<usize>,
    /// Directory for cached oracle results.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

impl ParamArgs {
    fn settings(&self) -> Result<Settings, ConfigError> {
        let preset = match &self.preset {
            Some(name) => Some(wavepacket_core::Preset::from_name(name).ok_or_else(|| {
                ConfigError::invalid("preset", format!("unknown preset '{name}' (expected fig1, fig2 or fig3)"))
            })?),
            None => None,
        };
        Ok(Settings {
            preset,
            v0: self.v0,
            d: self.d,
            m: self.m,
            hbar: self.hbar,
            xc: self.xc,
            pc: self.pc,
            deltax: self.deltax,
            t: self.t,
            ..Settings::default()
        })
    }
}

impl WindowArgs {
    fn settings(&self) -> Settings {
        Settings { p_lo: self.p_lo, p_hi: self.p_hi, n_points: self.n_points, ..Settings::default() }
    }
}

impl OutputArgs {
    fn settings(&self) -> Settings {
        Settings { out: self.out.clone(), format: self.format, ..Settings::default() }
    }
}

impl Command {
    /// Flag settings of the command, not yet layered.
    pub fn flag_settings(&self) -> Result<Settings, ConfigError> {
        Ok(match self {
            Command::Psi { params, window, terms, output } => {
                params.settings()?.over(window.settings()).over(output.settings()).over(Settings {
                    n_poles: terms.n_poles,
                    n_corrections: terms.n_corrections,
                    breakdown: terms.breakdown.then_some(true),
                    ..Settings::default()
                })
            }
            Command::Poles { params, n_max, output } => {
                params.settings()?.over(output.settings()).over(Settings { n_max: *n_max, ..Settings::default() })
            }
            Command::Figure { name, params, window, output } => {
                let preset = wavepacket_core::Preset::from_name(name).ok_or_else(|| {
                    ConfigError::invalid("name", format!("unknown figure '{name}' (expected fig1, fig2 or fig3)"))
                })?;
                if params.preset.as_deref().is_some_and(|p| p != name) {
                    return Err(ConfigError::invalid("preset", "conflicts with the figure name"));
                }
                Settings { preset: Some(preset), ..Settings::default() }
                    .over(params.settings()?)
                    .over(window.settings())
                    .over(output.settings())
            }
            Command::Compare { params, window, grid, output } => {
                params.settings()?.over(window.settings()).over(output.settings()).over(Settings {
                    half_width: grid.half_width,
                    n_x: grid.n_x,
                    n_t: grid.n_t,
                    cache_dir: grid.cache_dir.clone(),
                    ..Settings::default()
                })
            }
        })
    }

    fn config_path(&self) -> Option<&std::path::Path> {
        match self {
            Command::Psi { params, .. }
            | Command::Poles { params, .. }
            | Command::Figure { params, .. }
            | Command::Compare { params, .. } => params.config.as_deref(),
        }
    }
}

/// Runs a parsed command line, writing its output.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let flags = cli.command.flag_settings()?;
    let path = cli.command.config_path();
    let (table, settings) = match &cli.command {
        Command::Psi { .. } => {
            let settings = flags.layered(path)?;
            (commands::psi(&settings)?, settings)
        }
        Command::Poles { .. } => {
            let settings = flags.layered(path)?;
            (commands::poles(&settings)?, settings)
        }
        Command::Figure { .. } => {
            let settings = flags.layered(path)?;
            (commands::figure(&settings)?, settings)
        }
        Command::Compare { .. } => {
            let settings = commands::compare_defaults(flags, path)?;
            (commands::compare(&settings)?, settings)
        }
    };
    match table.write(settings.format.unwrap_or(Format::Csv), settings.out.as_deref()) {
        Err(err) if err.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}
