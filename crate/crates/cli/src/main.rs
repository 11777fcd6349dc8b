//! `authorlm`: train, filter, generate and evaluate author-style character
//! language models.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error, 3 numeric
//! divergence, 4 NLI provider failure. Failures end with one line on stderr:
//!
//! ```text
//! authorlm: error class=<config|data|numeric|provider> exit=<n> message=<JSON string>
//! ```

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use authorlm::{Error, ErrorClass};
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "authorlm",
    version,
    about = "Author-style character language models"
)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the three-phase training pipeline from a JSON run config.
    Train(TrainArgs),
    /// Continue a prompt with a trained checkpoint.
    Generate(GenerateArgs),
    /// Split ground-truth text into chunks and drop those contradicting the author.
    Filter(FilterArgs),
    /// Perplexity on test text, optional same/other-author experiments.
    Eval(EvalArgs),
    /// Train every architecture under one budget and rank them on held-out text.
    Compare(CompareArgs),
    /// List stop words the author never used and the neutral passages that supply them.
    ExtendVocab(ExtendVocabArgs),
    /// Write an untrained checkpoint (zero or seeded weights) for a corpus.
    InitCheckpoint(InitArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Run config (JSON). Relative paths inside resolve against its directory.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `output_dir`.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Overrides `train.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `provider`: `heuristic` or `remote:<url>`.
    #[arg(long)]
    pub provider: Option<String>,
    /// Overrides `bin_path`.
    #[arg(long)]
    pub bin: Option<PathBuf>,
    /// Also write the raw per-step losses (`losses.csv`).
    #[arg(long)]
    pub dump_losses: bool,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub prompt: String,
    /// Characters to generate after the prompt.
    #[arg(long, default_value_t = 500)]
    pub length: usize,
    /// greedy, temperature or top_k.
    #[arg(long, default_value = "temperature")]
    pub mode: String,
    #[arg(long, default_value_t = 0.8)]
    pub temperature: f64,
    #[arg(long, default_value_t = 5)]
    pub top_k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub ground: PathBuf,
    #[arg(long)]
    pub author: PathBuf,
    /// `heuristic` or `remote:<url>`.
    #[arg(long, default_value = "heuristic")]
    pub provider: String,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Contradiction bin, read and extended in place.
    #[arg(long)]
    pub bin: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    pub chunk_chars: usize,
    /// Keep case and whitespace as in the input files.
    #[arg(long)]
    pub no_normalize: bool,
    #[arg(long)]
    pub max_author_chunks: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub retries: u32,
    #[arg(long, default_value_t = 4)]
    pub parallelism: usize,
    #[arg(long, default_value = "runs/filter")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Held-out text by the training author.
    #[arg(long)]
    pub test: PathBuf,
    /// Text by a different author; enables the same/other experiments.
    #[arg(long)]
    pub other_author: Option<PathBuf>,
    /// Word list for the non-dictionary rate of generated text.
    #[arg(long)]
    pub dictionary: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub experiments: usize,
    #[arg(long, default_value_t = 1000)]
    pub chunk_chars: usize,
    /// Characters generated per experiment chunk for the non-dictionary rate.
    #[arg(long, default_value_t = 300)]
    pub length: usize,
    #[arg(long, default_value = "temperature")]
    pub mode: String,
    #[arg(long, default_value_t = 0.8)]
    pub temperature: f64,
    #[arg(long, default_value_t = 5)]
    pub top_k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "runs/eval")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Run config; `train` and `corpora.author` are used.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "bilstm,lstm_uni,rnn")]
    pub architectures: Vec<String>,
    /// Defaults to the config's seed.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    #[arg(long, default_value = "runs/compare")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtendVocabArgs {
    #[arg(long)]
    pub author: PathBuf,
    #[arg(long)]
    pub neutral: PathBuf,
    #[arg(long)]
    pub dictionary: PathBuf,
    #[arg(long)]
    pub stopwords: PathBuf,
    #[arg(long, default_value_t = 400)]
    pub chunk_len: usize,
    #[arg(long, default_value_t = 2)]
    pub max_per_word: usize,
    #[arg(long, default_value = "runs/extend")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct InitArgs {
    /// Corpus whose characters form the vocabulary.
    #[arg(long)]
    pub author: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// zero (uniform predictor) or uniform (seeded random weights).
    #[arg(long, default_value = "zero")]
    pub init: String,
    #[arg(long, default_value = "bilstm")]
    pub architecture: String,
    #[arg(long, default_value_t = 100)]
    pub hidden: usize,
    #[arg(long, default_value_t = 100)]
    pub seq_len: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Config => 1,
        ErrorClass::Data => 2,
        ErrorClass::Numeric => 3,
        ErrorClass::Provider => 4,
    }
}

fn class_name(class: ErrorClass) -> &'static str {
    match class {
        ErrorClass::Config => "config",
        ErrorClass::Data => "data",
        ErrorClass::Numeric => "numeric",
        ErrorClass::Provider => "provider",
    }
}

fn fail(e: &Error) -> ExitCode {
    let class = e.class();
    let code = exit_code(class);
    let msg = serde_json::to_string(&e.to_string()).unwrap_or_else(|_| "\"?\"".into());
    eprintln!(
        "authorlm: error class={} exit={code} message={msg}",
        class_name(class)
    );
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            if code != 0 {
                let msg = serde_json::to_string(&e.kind().to_string()).unwrap_or_default();
                eprintln!("authorlm: error class=config exit=1 message={msg}");
            }
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("AUTHORLM_LOG")
        .init();

    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Generate(a) => commands::generate(a),
        Command::Filter(a) => commands::filter(a),
        Command::Eval(a) => commands::eval(a),
        Command::Compare(a) => commands::compare(a),
        Command::ExtendVocab(a) => commands::extend_vocab(a),
        Command::InitCheckpoint(a) => commands::init_checkpoint(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
