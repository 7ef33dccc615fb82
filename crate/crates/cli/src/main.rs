use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::RunConfig;

/// Event-aware argument extraction: synthetic data, training, iterative
/// prediction and scoring.
#[derive(Debug, Parser)]
#[command(name = "eventarg", version)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Raise log verbosity (repeatable). RUST_LOG takes precedence.
    #[arg(long, short, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus, its ontology and the answer key.
    Synth(SynthArgs),
    /// Train an extractor and write a checkpoint.
    Train(TrainArgs),
    /// Run iterative inference and write final assignments.
    Predict(PredictArgs),
    /// Score predictions against a gold corpus.
    Evaluate(EvaluateArgs),
    /// Dump augmented contexts for every event.
    Augment(AugmentArgs),
    /// Print the effective configuration as TOML.
    Config,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory for corpus.jsonl, ontology.json and answer_key.jsonl.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    num_docs: Option<usize>,
    #[arg(long)]
    ambiguity_rate: Option<f64>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    ontology: Option<PathBuf>,
    /// Where to write the trained model.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Per-step losses, JSONL.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    ontology: Option<PathBuf>,
    /// Final assignments, JSONL.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of inference iterations K.
    #[arg(long)]
    iterations: Option<usize>,
    /// Neighborhood window in tokens.
    #[arg(long)]
    window: Option<usize>,
    /// Every iteration's contexts, outputs and assignments, JSONL.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    beam_size: Option<usize>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    pred: Option<PathBuf>,
    /// Gold corpus, JSONL.
    #[arg(long)]
    gold: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Optional role-consistency report of the predictions.
    #[arg(long)]
    consistency: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AugmentArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Assignments to tag, in predictions format; gold arguments if omitted.
    #[arg(long)]
    assignments: Option<PathBuf>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Bad invocation: missing required value or conflicting options.
#[derive(Debug)]
pub struct UsageError(pub String);

/// Invalid configuration or input data.
#[derive(Debug)]
pub struct DataError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}
impl std::error::Error for DataError {}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if cause.is::<DataError>() || cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return EXIT_DATA;
        }
        if let Some(e) = cause.downcast_ref::<eventarg::Error>() {
            return if e.is_data_error() { EXIT_DATA } else { EXIT_INTERNAL };
        }
    }
    EXIT_INTERNAL
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Synth(args) => commands::synth(&mut config, args),
        Command::Train(args) => commands::train(&mut config, args),
        Command::Predict(args) => commands::predict(&mut config, args),
        Command::Evaluate(args) => commands::evaluate(&mut config, args),
        Command::Augment(args) => commands::augment(&mut config, args),
        Command::Config => {
            print!("{}", toml::to_string(&config)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
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
