//! `taug`: augment, translate, train and evaluate fake-news classifiers.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use taug::augment::AugmentMode;
use taug::corpus::{Format, Label, Split};

use crate::config::FileConfig;

#[derive(Debug, Parser)]
#[command(name = "taug", version, about = "Synonym augmentation, translation and classification of news corpora")]
pub struct Cli {
    /// TOML or JSON pipeline configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate and merge corpus files into one.
    Ingest(IngestArgs),
    /// Replace nouns with their closest synonyms.
    Augment(AugmentArgs),
    /// Translate every document through a backend.
    Translate(TranslateArgs),
    /// Train a classifier.
    Train(TrainArgs),
    /// Score a model on a labelled corpus.
    Eval(EvalArgs),
    /// Classify one text.
    Classify(ClassifyArgs),
    /// Word-frequency table of a corpus.
    Stats(StatsArgs),
    /// Augment, translate, train and evaluate in one run.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Jsonl => Format::Jsonl,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
    All,
}

impl SplitArg {
    pub fn keeps(self, split: Split) -> bool {
        match self {
            SplitArg::Train => split == Split::Train,
            SplitArg::Test => split == Split::Test,
            SplitArg::All => true,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LabelArg {
    Real,
    Fake,
}

impl From<LabelArg> for Label {
    fn from(l: LabelArg) -> Self {
        match l {
            LabelArg::Real => Label::Real,
            LabelArg::Fake => Label::Fake,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Append,
    Replace,
}

impl From<ModeArg> for AugmentMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Append => AugmentMode::Append,
            ModeArg::Replace => AugmentMode::Replace,
        }
    }
}

/// Input and output corpus files.
#[derive(Debug, Args)]
pub struct Io {
    /// Input corpus (format from extension unless --format is given).
    #[arg(long = "in", value_name = "FILE")]
    pub input: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    #[arg(long, value_enum)]
    pub out_format: Option<FormatArg>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Corpus files to merge, in order.
    #[arg(long = "in", value_name = "FILE", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub out_format: Option<FormatArg>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[command(flatten)]
    pub io: Io,
    /// Directory with pos.tsv, synonyms.json and embeddings.txt.
    #[arg(long, value_name = "DIR")]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Write one JSON line per replacement.
    #[arg(long, value_name = "FILE")]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TranslationFlags {
    /// `mock:<map.json>`, `command:<exe>` or `identity`.
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long = "src")]
    pub source_lang: Option<String>,
    #[arg(long = "tgt")]
    pub target_lang: Option<String>,
    #[arg(long)]
    pub max_chars: Option<usize>,
    /// Minimum gap between requests, e.g. `1s` or `250ms`.
    #[arg(long, value_parser = config::parse_delay)]
    pub delay: Option<std::time::Duration>,
    /// One request per sentence for texts over the limit.
    #[arg(long)]
    pub per_sentence: bool,
    #[arg(long)]
    pub retries: Option<u32>,
}

#[derive(Debug, Args)]
pub struct TranslateArgs {
    #[command(flatten)]
    pub io: Io,
    #[command(flatten)]
    pub flags: TranslationFlags,
    /// JSONL progress file; finished documents are not translated again.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SegmentFlags {
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub overlap: Option<usize>,
    #[arg(long)]
    pub max_seq_len: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainFlags {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub val_fraction: Option<f64>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    /// Five comma-separated widths ending in 1.
    #[arg(long, value_delimiter = ',')]
    pub dense_dims: Option<Vec<usize>>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long = "lr")]
    pub learning_rate: Option<f64>,
    /// Whole words kept in a newly built vocabulary.
    #[arg(long)]
    pub vocab_words: Option<usize>,
    #[command(flatten)]
    pub segment: SegmentFlags,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_name = "FILE")]
    pub train: Option<PathBuf>,
    /// Validation corpus; without it a stratified holdout is drawn.
    #[arg(long, value_name = "FILE")]
    pub val: Option<PathBuf>,
    /// Documents of this split are used for training.
    #[arg(long, value_enum, default_value = "train")]
    pub split: SplitArg,
    /// Loaded if it exists, otherwise built from the training corpus.
    #[arg(long, value_name = "FILE")]
    pub vocab: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Training report JSON.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub flags: TrainFlags,
}

#[derive(Debug, Args)]
pub struct ModelInputs {
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Vocabulary the model was trained with.
    #[arg(long, value_name = "FILE")]
    pub vocab: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StopwordFlags {
    /// One stopword per line; replaces the built-in list.
    #[arg(long, value_name = "FILE")]
    pub stopwords: Option<PathBuf>,
    /// Count every word.
    #[arg(long, conflicts_with = "stopwords")]
    pub no_stopwords: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub model: ModelInputs,
    #[arg(long, value_name = "FILE")]
    pub test: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    /// Metrics JSON (also printed to stdout).
    #[arg(long, value_name = "FILE")]
    pub metrics: Option<PathBuf>,
    /// One JSON prediction per line.
    #[arg(long, value_name = "FILE")]
    pub predictions: Option<PathBuf>,
    /// Word frequencies of the misclassified documents, as CSV.
    #[arg(long, value_name = "FILE")]
    pub misclassified_freq: Option<PathBuf>,
    #[arg(long)]
    pub top: Option<usize>,
    #[command(flatten)]
    pub stopwords: StopwordFlags,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub model: ModelInputs,
    /// Text file, or `-` for stdin.
    #[arg(long, value_name = "FILE")]
    pub text: PathBuf,
    #[arg(long, default_value = "input")]
    pub id: String,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long = "in", value_name = "FILE")]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    #[arg(long)]
    pub top: Option<usize>,
    #[arg(long, value_enum, default_value = "all")]
    pub split: SplitArg,
    #[arg(long, value_enum)]
    pub label: Option<LabelArg>,
    /// JSON array of [word, count] instead of CSV.
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    pub stopwords: StopwordFlags,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Corpus holding both train and test documents.
    #[arg(long = "in", value_name = "FILE")]
    pub input: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub lexicon: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Skip the augmentation step.
    #[arg(long)]
    pub no_augment: bool,
    #[command(flatten)]
    pub translation: TranslationFlags,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(long)]
    pub top: Option<usize>,
    #[command(flatten)]
    pub stopwords: StopwordFlags,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    let result = match &cli.config {
        Some(path) => FileConfig::load(path),
        None => Ok(FileConfig::default()),
    }
    .and_then(|cfg| commands::run(cli.command, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let detail = e.to_string().replace('\n', " ");
            eprintln!("ERROR {}: {detail}", e.code());
            ExitCode::from(1)
        }
    }
}
