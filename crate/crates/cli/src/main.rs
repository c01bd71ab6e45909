//! Batch front end: configured runs, named presets, and parameter sweeps.
//!
//! Exit codes: 0 success, 1 bad invocation (unknown preset, malformed
//! arguments — usage goes to stderr), 2 solver failure, 3 config error.
//! `HEMBRIT_WORKERS` caps the worker threads used for sweep parallelism.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use hembrit::config::parse_config;
use hembrit::driver::{ScenarioConfig, SweepAxis};
use hembrit::presets::{execute_config, execute_preset, execute_sweep, Preset};

#[derive(Parser)]
#[command(name = "hembrit", version, about = "Round-bar tensile tests with hydrogen charging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario from a config file.
    Run {
        /// Scenario description (key-value format, see README).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for the CSV and manifest.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run a named preset: in-air, h1, h2, sweep-crel, sweep-b, validate-point.
    Preset {
        name: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Vary one parameter of a base config over a list of values.
    Sweep {
        /// Base scenario; the axis overrides one parameter per value.
        #[arg(long)]
        config: PathBuf,
        /// One of: crel, b, ctotal.
        #[arg(long)]
        axis: String,
        /// Comma-separated values, e.g. `0,0.25,0.5`.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

const EXIT_USAGE: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_CONFIG: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests arrive as "errors" but are success paths.
            let shown = e.print().is_ok();
            let ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            return if ok && shown { ExitCode::SUCCESS } else { ExitCode::from(EXIT_USAGE) };
        }
    };
    configure_workers();
    match run(cli) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("usage: hembrit (run|preset|sweep) ...; see hembrit --help");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Core(e)) if e.is_config() => {
            eprintln!("config error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Core(e)) => {
            eprintln!("solver error: {e}");
            ExitCode::from(EXIT_SOLVER)
        }
    }
}

enum Failure {
    /// Bad invocation: exits 1 with a usage hint.
    Usage(String),
    /// Failure from the simulator; exit code depends on the error class.
    Core(hembrit::Error),
}

impl From<hembrit::Error> for Failure {
    fn from(e: hembrit::Error) -> Self {
        Failure::Core(e)
    }
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, Failure> {
    match cli.command {
        Command::Run { config, out } => {
            let (cfg, stem) = load_config(&config)?;
            Ok(qualify(execute_config(cfg, &stem, &out)?, &out))
        }
        Command::Preset { name, out } => {
            let preset = Preset::from_str(&name)
                .map_err(|_| Failure::Usage(format!("unknown preset `{name}`")))?;
            Ok(qualify(execute_preset(preset, &out)?, &out))
        }
        Command::Sweep { config, axis, values, out } => {
            let axis = SweepAxis::from_str(&axis).map_err(|e| Failure::Usage(e.to_string()))?;
            if values.is_empty() {
                return Err(Failure::Usage("sweep needs at least one value".into()));
            }
            let (cfg, stem) = load_config(&config)?;
            Ok(qualify(execute_sweep(cfg, axis, &values, &stem, &out)?, &out))
        }
    }
}

/// Parse a config file; the file stem names the outputs.
fn load_config(path: &Path) -> Result<(ScenarioConfig, String), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Failure::Core(hembrit::Error::ConfigGeneral(format!("{}: {e}", path.display())))
    })?;
    let cfg = parse_config(&text)?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".to_string());
    Ok((cfg, stem))
}

fn qualify(files: Vec<String>, out: &Path) -> Vec<PathBuf> {
    files.into_iter().map(|f| out.join(f)).collect()
}

/// Honor `HEMBRIT_WORKERS` before any parallel region spins up the default
/// thread pool.
fn configure_workers() {
    if let Ok(raw) = std::env::var("HEMBRIT_WORKERS") {
        match raw.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("warning: ignoring HEMBRIT_WORKERS={raw} (want a positive integer)"),
        }
    }
}
