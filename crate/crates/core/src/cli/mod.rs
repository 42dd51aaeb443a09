//! Command-line front end: `bounds`, `spanning`, `simulate`, `verify`.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Result;
use commands::{exit_code, EXIT_CONFIG, EXIT_OK};
use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "taurec", version, about = "Recurrence entropy bounds, spanning-set oracle and quantized recurrence control")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file for records (the episode log for `simulate`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Integration step in seconds.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub dt: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Upper and lower entropy bounds for the configured system.
    Bounds {
        #[arg(long, allow_negative_numbers = true)]
        tau: Option<f64>,
    },
    /// Exact spanning-set covers over the configured (T, ε, τ) grid.
    Spanning,
    /// Run one quantized control episode.
    Simulate {
        #[arg(long, allow_negative_numbers = true)]
        tau: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        eps: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        alpha: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        /// Also write the trajectories as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Re-check the guarantees of a stored episode log.
    Verify { log: PathBuf },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.common.seed {
        cfg.seed = s;
    }
    if let Some(dt) = cli.common.dt {
        cfg.dt = dt;
    }
    match &cli.command {
        Command::Bounds { tau } => {
            cfg.tau = tau.unwrap_or(cfg.tau);
        }
        Command::Simulate { tau, eps, alpha, steps, .. } => {
            cfg.tau = tau.unwrap_or(cfg.tau);
            cfg.eps = eps.unwrap_or(cfg.eps);
            cfg.alpha = alpha.unwrap_or(cfg.alpha);
            cfg.steps = steps.unwrap_or(cfg.steps);
        }
        Command::Spanning | Command::Verify { .. } => {}
    }
    Ok(cfg)
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let cfg = load_config(cli)?;
    let code = match &cli.command {
        Command::Bounds { .. } => {
            let mut out = open_out(&cli.common.out)?;
            let code = commands::cmd_bounds(&cfg, &mut out)?;
            out.flush()?;
            code
        }
        Command::Spanning => {
            let mut out = open_out(&cli.common.out)?;
            let code = commands::cmd_spanning(&cfg, &mut out)?;
            out.flush()?;
            code
        }
        Command::Simulate { csv, .. } => {
            let mut summary = std::io::stdout().lock();
            let code = match &cli.common.out {
                Some(_) => {
                    let mut log = open_out(&cli.common.out)?;
                    let code = commands::cmd_simulate(&cfg, &mut summary, &mut log, csv.as_deref())?;
                    log.flush()?;
                    code
                }
                None => {
                    let (mut log, mut tail) = (Vec::new(), Vec::new());
                    let code = commands::cmd_simulate(&cfg, &mut tail, &mut log, csv.as_deref())?;
                    summary.write_all(&log)?;
                    summary.write_all(&tail)?;
                    code
                }
            };
            summary.flush()?;
            code
        }
        Command::Verify { log } => {
            let mut out = open_out(&cli.common.out)?;
            let code = commands::cmd_verify(log, &cfg.system, &mut out)?;
            out.flush()?;
            code
        }
    };
    Ok(code)
}

/// Parses arguments, runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
