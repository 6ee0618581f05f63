//! `jmimo`: command-line access to the MGF, moments, distributions and
//! comparison studies for Jacobi MIMO channels.

mod commands;
mod config;
mod manifest;

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use config::RawConfig;
use manifest::RunManifest;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical consistency failure: {0}")]
    Numerical(String),
    #[error("{0}")]
    Module(String),
    #[error("i/o failure: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
            CliError::Module(_) => 1,
        }
    }
}

impl From<jacobi_mimo::Error> for CliError {
    fn from(e: jacobi_mimo::Error) -> Self {
        match e {
            jacobi_mimo::Error::Config(msg) => CliError::Config(msg),
            _ if e.is_numerical() => CliError::Numerical(e.to_string()),
            _ => CliError::Module(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "jmimo", version, about = "Mutual-information statistics of Jacobi MIMO channels")]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,

    /// Write the CSV here instead of standard output.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// `key = value` file; flags given alongside it take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Number of transmit modes.
    #[arg(long, global = true)]
    m: Option<usize>,
    /// Number of receive modes.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Dimension of the underlying unitary.
    #[arg(long, global = true)]
    l: Option<usize>,
    /// Powers q_1,...,q_m.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    q: Option<Vec<f64>>,
    /// Monte Carlo sample count (default 200000).
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// `auto` or a fixed L.
    #[arg(long, global = true)]
    cutoff: Option<String>,
    /// Step of the κ grid (default 0.05).
    #[arg(long, global = true)]
    dkappa: Option<f64>,
    /// Also report capacities in bits.
    #[arg(long, global = true)]
    bits: bool,
}

impl ConfigArgs {
    fn raw(&self) -> Result<RawConfig, CliError> {
        let file = match &self.config {
            Some(p) => RawConfig::from_file(p)?,
            None => RawConfig::default(),
        };
        Ok(file.merge(RawConfig {
            m: self.m,
            n: self.n,
            l: self.l,
            q: self.q.clone(),
            samples: self.samples,
            seed: self.seed,
            cutoff: self.cutoff.clone(),
            dkappa: self.dkappa,
            bits: self.bits.then_some(true),
        }))
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Gaussian,
    Weibull,
    Fourier,
    Mc,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Pdf,
    Cdf,
    Sf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Wide,
    Tall,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// M(κ) on the symmetric inversion grid: kappa,re_M,im_M.
    Mgf,
    /// Mean, variance, skewness and ergodic capacity.
    Moments,
    /// Ergodic capacity (and the high-SNR formula for equal power, m < n).
    Capacity,
    /// One distribution curve.
    Dist {
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Grid points when no histogram is involved.
        #[arg(long, default_value_t = 600)]
        points: usize,
        /// Lower grid end (default max(0, μ - 6σ)).
        #[arg(long, allow_negative_numbers = true)]
        from: Option<f64>,
        /// Upper grid end (default μ + 6σ).
        #[arg(long)]
        to: Option<f64>,
        /// Histogram bin width for `--method mc`.
        #[arg(long, default_value_t = 0.02)]
        bin: f64,
    },
    /// KL divergences of the approximations against simulation.
    Compare {
        /// Run a built-in reference family instead of the given channel.
        #[arg(long, value_enum)]
        family: Option<FamilyArg>,
        #[arg(long, default_value_t = 1e-2)]
        mask: f64,
        #[arg(long, default_value_t = 0.02)]
        bin: f64,
    },
    /// Capacity against total power in dB, shaped by --ratios (default q).
    Sweep {
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        db_min: f64,
        #[arg(long, default_value_t = 30.0)]
        db_max: f64,
        #[arg(long, default_value_t = 1.0)]
        db_step: f64,
    },
    /// Inversion KL across (L, δκ) settings.
    Scan {
        /// `L:dkappa` pairs, comma separated (default: the reference grid for the channel shape).
        #[arg(long, value_delimiter = ',')]
        settings: Option<Vec<String>>,
        /// Independent ensembles averaged per cell (seeds seed, seed+1, ...).
        #[arg(long, default_value_t = 1)]
        replicates: usize,
        #[arg(long, default_value_t = 1e-2)]
        mask: f64,
        #[arg(long, default_value_t = 0.02)]
        bin: f64,
    },
}

fn run(cli: &Cli) -> Result<Vec<u8>, CliError> {
    let rc = cli.config.raw()?.validate()?;
    // argv[0] is normalised so the manifest does not depend on the install path.
    let argv: Vec<String> = std::iter::once("jmimo".to_string()).chain(std::env::args().skip(1)).collect();
    let timestamp = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    let mut out = RunManifest::new(argv, &rc, timestamp).render().into_bytes();
    match &cli.command {
        Command::Mgf => commands::mgf(&rc, &mut out)?,
        Command::Moments => commands::moments(&rc, &mut out)?,
        Command::Capacity => commands::capacity(&rc, &mut out)?,
        Command::Dist {
            method,
            kind,
            points,
            from,
            to,
            bin,
        } => commands::dist(&rc, *method, *kind, *points, (*from, *to), *bin, &mut out)?,
        Command::Compare { family, mask, bin } => commands::compare(&rc, *family, *mask, *bin, &mut out)?,
        Command::Sweep {
            ratios,
            db_min,
            db_max,
            db_step,
        } => commands::sweep(&rc, ratios.as_deref(), (*db_min, *db_max, *db_step), &mut out)?,
        Command::Scan {
            settings,
            replicates,
            mask,
            bin,
        } => commands::scan(&rc, settings.as_deref(), *replicates, *mask, *bin, &mut out)?,
    }
    Ok(out)
}

/// Output is buffered and written in one go, so a failed run never leaves a
/// partial file behind.
fn emit(path: Option<&PathBuf>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
        }
        Some(p) => {
            if let Err(e) = fs::write(p, bytes) {
                let _ = fs::remove_file(p);
                return Err(CliError::Io(format!("{}: {e}", p.display())));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(&cli).and_then(|bytes| emit(cli.output.as_ref(), &bytes)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("jmimo: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
