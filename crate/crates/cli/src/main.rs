//! `claimscreen`: corpus ingestion, embedding, training, evaluation and
//! attention-based interpretation from the command line.

mod commands;
mod config;
mod error;
mod svg;
mod workspace;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use claimscreen::corpus::Horizon;
use claimscreen::exec::Execution;
use claimscreen::interpret::Normalization;

use config::{PipelineConfig, Provider};
use error::CliError;
use workspace::Workspace;

#[derive(Debug, Parser)]
#[command(name = "claimscreen", version, about = "Screen patents for potential breakthrough technologies")]
struct Cli {
    /// Pipeline config file (TOML).
    #[arg(long, global = true, env = "CLAIMSCREEN_CONFIG")]
    config: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,
    /// Disable data parallelism.
    #[arg(long, global = true)]
    sequential: bool,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

fn parse_horizon(s: &str) -> Result<Horizon, String> {
    s.parse().map_err(|e: claimscreen::corpus::CorpusError| e.to_string())
}

fn parse_provider(s: &str) -> Result<Provider, String> {
    match s {
        "hashed" => Ok(Provider::Hashed),
        "cemb" => Ok(Provider::Cemb),
        other => Err(format!("unknown provider {other:?} (expected hashed or cemb)")),
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a planted-token synthetic corpus and its ground-truth key.
    Generate {
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Corpus output (default: paths.corpus).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Key output (default: corpus path with a .key.csv extension).
        #[arg(long)]
        key: Option<PathBuf>,
    },
    /// Parse, preprocess and label a corpus; writes the label table.
    Ingest {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write claim embeddings with the hashed provider or validate a CEMB file.
    Embed {
        #[arg(long, value_parser = parse_provider)]
        provider: Option<Provider>,
        /// Precomputed CEMB file (with --provider cemb).
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train on a stratified holdout split and save a checkpoint.
    Train {
        #[arg(long, value_parser = parse_horizon)]
        horizon: Option<Horizon>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Stratified k-fold cross-validation.
    Cv {
        #[arg(long, value_parser = parse_horizon)]
        horizon: Option<Horizon>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Metrics of a checkpoint on labeled patents.
    Evaluate {
        #[arg(long, value_parser = parse_horizon)]
        horizon: Option<Horizon>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Split table written by `train`; only its test rows are scored.
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predicted class per patent and horizon.
    Predict {
        #[arg(long = "horizon", value_parser = parse_horizon)]
        horizons: Vec<Horizon>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-claim attention reports.
    Explain {
        #[arg(long, value_parser = parse_horizon)]
        horizon: Option<Horizon>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Patent ids (default: every embedded patent).
        #[arg(long = "patent")]
        patents: Vec<String>,
        #[arg(long)]
        normalization: Option<Normalization>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Welch t-test of independent against dependent claim scores.
    Ttest {
        #[arg(long = "horizon", value_parser = parse_horizon)]
        horizons: Vec<Horizon>,
        #[arg(long)]
        normalization: Option<Normalization>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Metrics tables and score histograms (SVG).
    Report {
        #[arg(long = "horizon", value_parser = parse_horizon)]
        horizons: Vec<Horizon>,
        /// Score only the test rows of each `split-<horizon>.csv`.
        #[arg(long)]
        test_only: bool,
        #[arg(long)]
        normalization: Option<Normalization>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let ws = Workspace {
        config,
        force: cli.force,
        exec: if cli.sequential { Execution::Sequential } else { Execution::Parallel },
    };
    match cli.command {
        Command::Generate { n, fraction, seed, out, key } => commands::generate(&ws, n, fraction, seed, out, key),
        Command::Ingest { corpus, out } => commands::ingest(&ws, corpus, out),
        Command::Embed { provider, input, out } => commands::embed(&ws, provider, input, out),
        Command::Train { horizon, checkpoint } => commands::train(&ws, horizon, checkpoint),
        Command::Cv { horizon, k } => commands::cv(&ws, horizon, k),
        Command::Evaluate { horizon, checkpoint, split, out } => {
            commands::evaluate_cmd(&ws, horizon, checkpoint, split, out)
        }
        Command::Predict { horizons, out } => commands::predict(&ws, &horizons, out),
        Command::Explain { horizon, checkpoint, patents, normalization, out_dir } => {
            commands::explain_cmd(&ws, horizon, checkpoint, &patents, normalization, out_dir)
        }
        Command::Ttest { horizons, normalization, out } => commands::ttest(&ws, &horizons, normalization, out),
        Command::Report { horizons, test_only, normalization } => {
            commands::report(&ws, &horizons, test_only, normalization)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { error::exit::USAGE } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
