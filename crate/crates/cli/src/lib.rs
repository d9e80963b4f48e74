//! Command-line front end for `ringwalk`.
//!
//! `run` parses arguments, executes one subcommand and returns the process
//! exit code: 0 on success, 1 for usage, config and I/O errors, 2 when a
//! numerical tolerance check fails.

pub mod commands;
pub mod config;
pub mod error;
pub mod figures;
pub mod output;

use std::ffi::OsString;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::commands::{AuditSource, Outcome};
use crate::config::{ExperimentConfig, MAX_CONFIG_BYTES};
use crate::error::CliError;
use crate::figures::FigureId;
use crate::output::Metadata;

/// Caps the worker threads used by momentum sweeps.
pub const THREADS_ENV: &str = "RINGWALK_THREADS";

#[derive(Debug, Parser)]
#[command(name = "ringwalk", version, about = "Quantum walks on coupled and Moire rings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenphase bands of the Bloch step matrix.
    Spectrum(ConfigArgs),
    /// Time evolution from a localized or superposed initial state.
    Evolve(ConfigArgs),
    /// Block audit and bands of a Moire ring grid.
    Moire(ConfigArgs),
    /// Bands of the concentric grid after swapping two block columns.
    Swap(ConfigArgs),
    /// Block-unitarity audit of a grid dump or a configured grid.
    Audit(AuditArgs),
    /// Checks that a field rigidly shifts the spectrum in momentum.
    AbShift(AbShiftArgs),
    /// Regenerates one built-in figure panel.
    ReproduceFigure(FigureArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// TOML experiment config.
    #[arg(long)]
    pub config: PathBuf,
    /// Output path stem; defaults to the config path without extension.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[arg(long, required_unless_present = "grid", conflicts_with = "grid")]
    pub config: Option<PathBuf>,
    /// Grid dump written by `swap`.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AbShiftArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    /// Field strength B; overrides `field_b`.
    #[arg(long, allow_hyphen_values = true)]
    pub field: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FigureArgs {
    /// Figure id, e.g. 3a, 5L, 10.
    pub id: String,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

fn read_limited(path: &Path) -> Result<String, CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::open(path).map_err(io)?;
    let mut text = String::new();
    file.take(MAX_CONFIG_BYTES as u64 + 1)
        .read_to_string(&mut text)
        .map_err(io)?;
    if text.len() > MAX_CONFIG_BYTES {
        return Err(CliError::config(format!(
            "{} exceeds {MAX_CONFIG_BYTES} bytes",
            path.display()
        )));
    }
    Ok(text)
}

fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    ExperimentConfig::from_toml(&read_limited(path)?).map_err(|e| {
        CliError::config(format!(
            "{}: {}",
            path.display(),
            e.to_string().trim_start_matches("config error: ")
        ))
    })
}

/// Splits an output stem into directory and file-name prefix.
fn split_stem(out: Option<&Path>, input: &Path) -> Result<(PathBuf, String), CliError> {
    let stem_path = match out {
        Some(p) => p.to_path_buf(),
        None => input.with_extension(""),
    };
    let name = stem_path
        .file_name()
        .and_then(|n| n.to_str())
        .filter(|n| !n.is_empty())
        .ok_or_else(|| CliError::Usage(format!("cannot derive an output name from {}", stem_path.display())))?
        .to_string();
    let dir = stem_path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((dir, name))
}

/// Writes every artifact under `dir`, creating it if needed.
pub fn write_outcome(outcome: &Outcome, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    outcome
        .files
        .iter()
        .map(|a| {
            let path = dir.join(&a.name);
            fs::write(&path, &a.contents).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            Ok(path)
        })
        .collect()
}

fn with_config(
    args: &ConfigArgs,
    command: &str,
    f: impl FnOnce(&ExperimentConfig, &str, Metadata) -> Result<Outcome, CliError>,
) -> Result<(Outcome, PathBuf), CliError> {
    let cfg = load_config(&args.config)?;
    let (dir, stem) = split_stem(args.out.as_deref(), &args.config)?;
    let meta = Metadata::new(command, &cfg);
    Ok((f(&cfg, &stem, meta)?, dir))
}

/// Runs a parsed command without touching the process state.
pub fn execute(cli: &Cli) -> Result<(Outcome, PathBuf), CliError> {
    match &cli.command {
        Command::Spectrum(a) => with_config(a, "spectrum", commands::spectrum),
        Command::Evolve(a) => with_config(a, "evolve", commands::evolve),
        Command::Moire(a) => with_config(a, "moire", commands::moire),
        Command::Swap(a) => with_config(a, "swap", commands::swap),
        Command::AbShift(a) => with_config(&a.common, "ab-shift", |cfg, stem, meta| {
            commands::ab_shift(cfg, a.field, stem, meta)
        }),
        Command::Audit(a) => {
            if let Some(grid) = &a.grid {
                let text = fs::read_to_string(grid).map_err(|source| CliError::Io {
                    path: grid.clone(),
                    source,
                })?;
                // `x.grid.json` reports as `x.grid_audit.csv`, leaving `x.meta.json` alone.
                let default = grid.with_extension("");
                let (dir, stem) = split_stem(Some(a.out.as_deref().unwrap_or(&default)), grid)?;
                let mut meta = Metadata::new("audit", &ExperimentConfig::default());
                meta.pinned.insert("grid".to_string(), grid.display().to_string());
                Ok((commands::audit(AuditSource::Dump(&text), &stem, meta)?, dir))
            } else {
                let path = a.config.as_ref().expect("clap requires --config or --grid");
                let cfg = load_config(path)?;
                let (dir, stem) = split_stem(a.out.as_deref(), path)?;
                let meta = Metadata::new("audit", &cfg);
                Ok((commands::audit(AuditSource::Config(&cfg), &stem, meta)?, dir))
            }
        }
        Command::ReproduceFigure(a) => {
            let id = FigureId::parse(&a.id)?;
            Ok((commands::reproduce_figure(&id)?, a.out_dir.clone()))
        }
    }
}

fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::config(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Err(CliError::config(format!("{THREADS_ENV} is not valid unicode"))),
    }
}

fn run_parsed(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<Outcome, CliError> {
    let go = || -> Result<(Outcome, Vec<PathBuf>), CliError> {
        let (outcome, dir) = execute(cli)?;
        let written = write_outcome(&outcome, &dir)?;
        Ok((outcome, written))
    };
    let (outcome, written) = match thread_cap()? {
        None => go()?,
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::config(format!("thread pool: {e}")))?
            .install(go)?,
    };
    // A closed stdout (e.g. piped into `head`) must not abort the run.
    for w in &outcome.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    for line in &outcome.report {
        let _ = writeln!(out, "{line}");
    }
    for p in written {
        let _ = writeln!(out, "wrote {}", p.display());
    }
    Ok(outcome)
}

/// Entry point used by the binary; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

/// [`run`] with report and diagnostic streams supplied by the caller.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let failure = match run_parsed(&cli, out, err) {
        Ok(outcome) => outcome.failure,
        Err(e) => Some(e),
    };
    match failure {
        Some(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
        None => 0,
    }
}
