use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

mod commands;
mod config;

use commands::Queries;
use config::{PipelineConfig, SharedFlags};

/// Spectral fingerprints of peer-count time series.
#[derive(Debug, Parser)]
#[command(name = "netprint", version)]
struct Cli {
    #[command(flatten)]
    shared: SharedFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Geolocate crawl snapshots into per-country count series
    Ingest {
        #[arg(long)]
        snapshots: PathBuf,
        /// IP range table; falls back to `geodb` in the config file
        #[arg(long)]
        geodb: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute amplitude fingerprints for every window in a directory
    Fingerprint {
        #[arg(long)]
        input: PathBuf,
        /// Start of the window to cut from count series (repeatable)
        #[arg(long = "window-start", allow_negative_numbers = true)]
        window_starts: Vec<i64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reduce fingerprints and compare entities
    Analyze {
        #[arg(long, required_unless_present = "matrix")]
        features: Option<PathBuf>,
        /// Query an existing similarity matrix instead of computing one
        #[arg(long, conflicts_with_all = ["features", "out", "regions"])]
        matrix: Option<PathBuf>,
        #[arg(long, required_unless_present = "matrix")]
        out: Option<PathBuf>,
        /// CSV of `entity,region` labels for the scatter map
        #[arg(long)]
        regions: Option<PathBuf>,
        /// Print the nearest neighbours of this entity
        #[arg(long)]
        query: Option<String>,
        #[arg(long, default_value_t = 5)]
        neighbors: usize,
        /// Print single-linkage groups cut at this distance
        #[arg(long)]
        cutoff: Option<f64>,
    },
    /// Replay feature histories through the anomaly detector
    Detect {
        #[arg(long)]
        history: PathBuf,
        /// Trained classifier; falls back to `model` in the config file
        #[arg(long)]
        model: Option<PathBuf>,
        /// Write alarms here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// ROC curve from `score,label` rows
    Roc {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate labelled synthetic windows
    Synth {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn warn(messages: &[String]) {
    for m in messages {
        eprintln!("warning: {m}");
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = PipelineConfig::resolve(&cli.shared)?;
    match cli.command {
        Command::Ingest {
            snapshots,
            geodb,
            out,
        } => {
            let geodb = geodb
                .or_else(|| config.geodb.clone())
                .context("--geodb is required (or set geodb in the config file)")?;
            print!("{}", commands::ingest(&snapshots, &geodb, &out)?);
        }
        Command::Fingerprint {
            input,
            window_starts,
            out,
        } => warn(&commands::fingerprint(
            &input,
            &window_starts,
            &config,
            &out,
        )?),
        Command::Analyze {
            features,
            matrix,
            out,
            regions,
            query,
            neighbors,
            cutoff,
        } => {
            let q = Queries {
                neighbors_of: query,
                neighbors,
                cutoff,
            };
            match (matrix, features, out) {
                (Some(m), _, _) => print!("{}", commands::analyze_matrix(&m, &q)?),
                (None, Some(f), Some(o)) => {
                    let report =
                        commands::analyze_features(&f, &config, &o, regions.as_deref(), &q)?;
                    warn(&report.warnings);
                    print!("{}", report.stdout);
                }
                _ => unreachable!("clap enforces --features and --out"),
            }
        }
        Command::Detect {
            history,
            model,
            out,
        } => emit(
            &commands::detect(&history, &config, model.as_deref())?,
            out.as_ref(),
        )?,
        Command::Roc { input, out } => emit(&commands::roc_csv(&input)?, out.as_ref())?,
        Command::Synth { params, out } => {
            let n = commands::synth(&params, &config, cli.shared.seed, cli.shared.t, &out)?;
            println!("wrote {n} windows to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
