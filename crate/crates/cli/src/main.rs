mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use omrf_core::data::SplitRatios;
use omrf_core::{Encoding, Error};

use config::{parse_split, Overrides};

#[derive(Parser, Debug)]
#[command(name = "omrf", version, about = "End-to-end optical music recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic single-staff corpus.
    Synth(SynthArgs),
    /// Train a model on a corpus.
    Train(TrainArgs),
    /// Score a checkpoint on one split of a corpus.
    Evaluate(EvalArgs),
    /// Transcribe images into token files.
    Predict(PredictArgs),
    /// Write original/augmented image pairs.
    AugmentPreview(PreviewArgs),
    /// Compare two directories of token files without a model.
    Score(ScoreArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_encoding)]
    encoding: Option<Encoding>,
    /// Train/validation/test percentages, e.g. 80,10,10.
    #[arg(long, value_parser = parse_split)]
    split: Option<SplitRatios>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            encoding: self.encoding,
            split: self.split,
            ..Default::default()
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Subset {
    Train,
    Val,
    Test,
    All,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 50)]
    n: usize,
    /// Number of distinct tokens (at most 32).
    #[arg(long)]
    vocab_size: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    corpus: PathBuf,
    /// Directory for checkpoints, vocabulary, resolved config and log.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    augment: Option<Toggle>,
    #[arg(long)]
    iters: Option<u64>,
    #[arg(long)]
    batch: Option<usize>,
    /// Resume from this checkpoint.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    subset: Subset,
    /// Also write the report as JSON to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    checkpoint: PathBuf,
    /// An image file or a directory of images.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PreviewArgs {
    #[command(flatten)]
    common: Common,
    /// An image file or a directory of images.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 4)]
    n: usize,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[command(flatten)]
    common: Common,
    /// Ground-truth token files.
    #[arg(long)]
    gt: PathBuf,
    /// Predicted token files, matched to ground truth by file stem.
    #[arg(long)]
    pred: PathBuf,
}

fn parse_encoding(s: &str) -> Result<Encoding, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        _ if e.is_numeric() => EXIT_NUMERIC,
        Error::Config(_) | Error::UnknownEncoding(_) | Error::UnknownAugmentation(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("OMRF_THREADS") else {
        return Ok(());
    };
    let n: usize = v.parse().map_err(|_| format!("OMRF_THREADS must be a number, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n.max(1))
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_USAGE);
    }
    let result = match cli.command {
        Command::Synth(a) => {
            let flags = a.common.overrides();
            commands::synth(a.common.config.as_deref(), &flags, &a.out, a.n, a.vocab_size)
        }
        Command::Train(a) => {
            let flags = Overrides {
                augment: a.augment.map(|t| matches!(t, Toggle::On)),
                iters: a.iters,
                batch: a.batch,
                ..a.common.overrides()
            };
            commands::train(a.common.config.as_deref(), &flags, &a.corpus, &a.out, a.checkpoint.as_deref())
        }
        Command::Evaluate(a) => {
            let subset = match a.subset {
                Subset::Train => Some(omrf_core::data::Split::Train),
                Subset::Val => Some(omrf_core::data::Split::Val),
                Subset::Test => Some(omrf_core::data::Split::Test),
                Subset::All => None,
            };
            let flags = a.common.overrides();
            commands::evaluate(a.common.config.as_deref(), &flags, &a.corpus, &a.checkpoint, subset, a.out.as_deref())
        }
        Command::Predict(a) => commands::predict(&a.checkpoint, &a.input, &a.out),
        Command::AugmentPreview(a) => {
            let flags = a.common.overrides();
            commands::augment_preview(a.common.config.as_deref(), &flags, &a.input, &a.out, a.n)
        }
        Command::Score(a) => {
            let flags = a.common.overrides();
            commands::score(a.common.config.as_deref(), &flags, &a.gt, &a.pred)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
