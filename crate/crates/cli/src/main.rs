//! `prosody-tag`: fit, apply and inspect word-level prosody taggers.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] prosody_core::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "prosody-tag",
    version,
    about = "Unsupervised word-level prosody tagging"
)]
struct Cli {
    /// Increase log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Grow the tree and fit per-leaf mixtures.
    Fit(FitArgs),
    /// Tag tokens with a fitted model.
    Tag(TagArgs),
    /// Export the growth curve and per-leaf statistics.
    Stats(StatsArgs),
    /// Generate a synthetic corpus with planted structure.
    Synth(SynthArgs),
    /// Pretty-print a model's tree.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    lexicon: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    /// Question set; the built-in set is used when omitted.
    #[arg(long)]
    questions: Option<PathBuf>,
    /// Phoneme class table; the built-in ARPAbet table is used when omitted.
    #[arg(long)]
    classes: Option<PathBuf>,
    /// Where to write the model.
    #[arg(long)]
    model: PathBuf,
    /// Also write the training tokens' tags here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Growth-curve CSV; defaults to the model path with `.trace.csv` appended.
    #[arg(long)]
    trace_csv: Option<PathBuf>,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    max_leaves: u64,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    components: u64,
    #[arg(long, default_value_t = 0.0)]
    min_gain: f64,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    min_leaf: u64,
    #[arg(long, default_value_t = 1e-6)]
    var_floor: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct TagArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    lexicon: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    /// Tag output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    model: PathBuf,
    /// Growth-curve CSV; stdout when omitted.
    #[arg(long)]
    trace_csv: Option<PathBuf>,
    /// Per-leaf CSV (sample count and mixture weights); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    archetypes: usize,
    #[arg(long, default_value_t = 50)]
    words: usize,
    #[arg(long, default_value_t = 10)]
    tokens: usize,
    /// Planted mixture components per archetype.
    #[arg(long, default_value_t = 5)]
    components: usize,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    /// Distance between component means in within-component standard deviations.
    #[arg(long, default_value_t = 8.0)]
    separation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Make archetypes differ in first-phoneme class as well as length.
    #[arg(long)]
    class_features: bool,
    /// Write embeddings in the binary float32 format.
    #[arg(long)]
    binary: bool,
}

#[derive(Debug, Args)]
struct InspectArgs {
    #[arg(long)]
    model: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("RUST_LOG")
        .init();

    let result = match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Tag(a) => commands::tag(a),
        Command::Stats(a) => commands::stats(a),
        Command::Synth(a) => commands::synth(a),
        Command::Inspect(a) => commands::inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
