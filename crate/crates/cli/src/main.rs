use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qcm_cli::commands::{self, Output};
use qcm_cli::{CliError, ExperimentConfig, Format};

#[derive(Parser)]
#[command(
    name = "qcm",
    version,
    about = "Simulate sequential measurements with a controlled projector"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; defaults to the config's `output`, then stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Exact figures of merit and joint statistics.
    Exact,
    /// Monte Carlo count histograms.
    Sample,
    /// Recover the complex joint distribution and the state.
    Reconstruct {
        /// Histogram JSON from `qcm sample` to use instead of simulating.
        #[arg(long)]
        histograms: Option<PathBuf>,
    },
    /// Reconstruction error versus measurement strength (CSV).
    Snr,
}

fn companion(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}-{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{suffix}"),
    };
    path.with_file_name(name)
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(output: &Output, dest: Option<&Path>, quiet: bool) -> Result<(), CliError> {
    match dest {
        Some(path) => {
            write(path, &output.main)?;
            if !quiet {
                eprintln!("wrote {}", path.display());
            }
            for (suffix, text) in &output.extra {
                let p = companion(path, suffix);
                write(&p, text)?;
                if !quiet {
                    eprintln!("wrote {}", p.display());
                }
            }
        }
        None => {
            print!("{}", output.main);
            for (_, text) in &output.extra {
                print!("\n{text}");
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Validation("--config <path> is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(format) = cli.format {
        cfg.format = format;
    }
    let output = match &cli.command {
        Command::Exact => commands::exact(&cfg)?,
        Command::Sample => commands::sample(&cfg)?,
        Command::Reconstruct { histograms } => {
            let text = histograms
                .as_deref()
                .map(|p| {
                    std::fs::read_to_string(p)
                        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", p.display())))
                })
                .transpose()?;
            commands::reconstruct(&cfg, text.as_deref())?
        }
        Command::Snr => commands::snr(&cfg)?,
    };
    let dest = cli.out.or(cfg.output);
    emit(&output, dest.as_deref(), cli.quiet)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
