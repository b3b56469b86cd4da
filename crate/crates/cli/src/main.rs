mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use aitd_core::logreg::Penalty;
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit codes: 0 ok, 2 input or I/O error, 3 topic leakage, 4 degenerate
/// training data.
const EXIT_INPUT: u8 = 2;
const EXIT_LEAKAGE: u8 = 3;
const EXIT_DEGENERATE: u8 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "aitd",
    version,
    about = "Detect AI-generated text with topic-grouped evaluation"
)]
struct Cli {
    /// TOML file supplying any flag; the command line takes precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = aitd_core::rng::DEFAULT_SEED)]
    seed: u64,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load, merge and clean raw JSONL/CSV files into one JSONL corpus.
    Ingest(IngestArgs),
    /// Split a corpus by topic into train/val/test and check for leakage.
    Split(SplitArgs),
    /// Train a classifier (grid search by default).
    Train(TrainArgs),
    /// Score a trained model on a labelled corpus and write a report.
    Evaluate(EvaluateArgs),
    /// Write per-record probabilities and labels.
    Predict(PredictArgs),
    /// Print a comparison table from one or more metrics.json files.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InputFormat {
    Auto,
    Jsonl,
    Csv,
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Raw input files; repeat for several.
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = InputFormat::Auto)]
    format: InputFormat,
    #[arg(long, default_value = "text")]
    text_column: String,
    #[arg(long, default_value = "label")]
    label_column: String,
    #[arg(long, default_value = "source")]
    source_column: String,
    #[arg(long)]
    id_column: Option<String>,
    /// Cleaned JSONL output.
    #[arg(long)]
    out: PathBuf,
    /// Optional JSON file for corpus statistics.
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("how").required(true).args(["targets", "manifest", "preset"])))]
struct SplitArgs {
    #[arg(long)]
    input: PathBuf,
    /// Train,val,test fractions, e.g. 0.7,0.2,0.1.
    #[arg(long)]
    targets: Option<String>,
    /// Existing manifest JSON.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Bundled manifest; only "paper" is available.
    #[arg(long, value_parser = ["paper"])]
    preset: Option<String>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelKindArg {
    TfidfLogreg,
    Bilstm,
}

impl ModelKindArg {
    fn name(self) -> &'static str {
        match self {
            ModelKindArg::TfidfLogreg => "tfidf-logreg",
            ModelKindArg::Bilstm => "bilstm",
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    model_kind: ModelKindArg,
    #[arg(long)]
    train: PathBuf,
    /// Validation corpus; required for bilstm.
    #[arg(long)]
    val: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Train one configuration: the first value of each axis, or its default.
    #[arg(long)]
    single_config: bool,

    /// TF-IDF vocabulary sizes to search.
    #[arg(long, value_delimiter = ',')]
    max_features: Vec<usize>,
    /// Inverse regularization strengths to search.
    #[arg(long = "c", value_delimiter = ',')]
    c: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    penalty: Vec<Penalty>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,

    #[arg(long, value_delimiter = ',')]
    hidden_units: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    dropout: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    batch_size: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    learning_rate: Vec<f64>,
    #[arg(long, default_value_t = 128)]
    embed_dim: usize,
    /// Vocabulary size including the PAD and UNK entries.
    #[arg(long, default_value_t = 30_000)]
    vocab_size: usize,
    #[arg(long, default_value_t = 600)]
    max_len: usize,
    #[arg(long, default_value_t = 15)]
    max_epochs: usize,
    #[arg(long, default_value_t = 3)]
    patience: usize,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Directory written by `train`.
    #[arg(long)]
    model_dir: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Probability at or above which a record is called AI.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model_dir: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// Output CSV with columns id,probability,label.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long, required = true, num_args = 1..)]
    metrics: Vec<PathBuf>,
    /// Also write the table to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Leakage found by `split`; maps to its own exit code.
#[derive(Debug)]
struct LeakageFailure(usize);

impl std::fmt::Display for LeakageFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "topic leakage check FAILED with {} violation(s)", self.0)
    }
}

impl std::error::Error for LeakageFailure {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<LeakageFailure>().is_some() {
            return EXIT_LEAKAGE;
        }
        if let Some(aitd_core::Error::Degenerate(_)) = cause.downcast_ref::<aitd_core::Error>() {
            return EXIT_DEGENERATE;
        }
    }
    EXIT_INPUT
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    let seed = cli.seed;
    match cli.command {
        Command::Ingest(a) => commands::ingest(&a, seed),
        Command::Split(a) => commands::split(&a, seed),
        Command::Train(a) => commands::train(&a, seed),
        Command::Evaluate(a) => commands::evaluate(&a, seed),
        Command::Predict(a) => commands::predict(&a, seed),
        Command::Report(a) => commands::report(&a),
    }
}

fn main() -> ExitCode {
    let argv = match config::merge_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_INPUT);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
