//! `synpara`: preprocess, train, generate, evaluate, build-dataset and
//! inspect-tree over the paraphrase library.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use synpara::tensor::TensorError;
use synpara::training::TrainError;

#[derive(Parser, Debug)]
#[command(name = "synpara", version, about = "Syntax-guided paraphrase generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Flat key-value config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice of the command.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
pub struct CorpusArgs {
    /// Tab-separated sentence pairs.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Parses of both pair columns, tab-separated, line-aligned with --pairs.
    #[arg(long)]
    pub trees: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Exemplar pruned at one height (full height unless --height).
    F,
    /// Best of five heights by ROUGE-1 with the source.
    R,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Learn BPE, vocabulary and label inventory; write id-encoded pairs.
    Preprocess {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and write checkpoints and the loss log.
    Train {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        common: Common,
        /// Reuse the lexicon of a preprocess or checkpoint directory.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate paraphrases for evaluation triples.
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Tab-separated source, exemplar, reference.
        #[arg(long)]
        triples: PathBuf,
        /// Three parses per line, aligned with --triples.
        #[arg(long)]
        trees: PathBuf,
        #[arg(long, value_enum, default_value = "f")]
        mode: Mode,
        #[arg(long)]
        height: Option<usize>,
        #[arg(long)]
        beam: Option<usize>,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score generations against triples, with copy baselines.
    Evaluate {
        #[arg(long)]
        triples: PathBuf,
        #[arg(long)]
        trees: PathBuf,
        /// Output of `generate`.
        #[arg(long)]
        generations: PathBuf,
        /// Parses of the generations, one per line; otherwise generations
        /// are matched to known sentences of the triples.
        #[arg(long)]
        gen_trees: Option<PathBuf>,
        /// Mean sentence BLEU instead of corpus BLEU.
        #[arg(long)]
        sentence_bleu: bool,
        /// Row name for the evaluated system.
        #[arg(long, default_value = "model")]
        system: String,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build evaluation triples from parsed pairs.
    BuildDataset {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        common: Common,
        /// Also write seeded test and validation subsets.
        #[arg(long)]
        split: bool,
        /// Candidates with BLEU to the source above this are dropped.
        #[arg(long, default_value_t = 0.6)]
        bleu_threshold: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a pruned tree, its leaf queue, spans and switch bits.
    InspectTree {
        /// File of bracketed trees; the first tree of --line is used.
        #[arg(long, conflicts_with = "tree")]
        trees: Option<PathBuf>,
        /// Bracketed tree given inline.
        #[arg(long)]
        tree: Option<String>,
        #[arg(long, default_value_t = 1)]
        line: usize,
        #[arg(long)]
        height: usize,
    },
}

/// Bad invocation; exit status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn classify(err: &anyhow::Error) -> (u8, &'static str) {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return (1, "usage");
        }
        match cause.downcast_ref::<TrainError>() {
            Some(TrainError::NonFinite) => return (3, "numeric"),
            Some(TrainError::Config(_)) => return (1, "usage"),
            _ => {}
        }
        if let Some(TensorError::NonFinite(_)) = cause.downcast_ref::<TensorError>() {
            return (3, "numeric");
        }
    }
    (2, "data")
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Preprocess { corpus, common, out } => commands::preprocess(&corpus, &common, &out),
        Command::Train {
            corpus,
            common,
            checkpoint,
            out,
        } => commands::train(&corpus, &common, checkpoint.as_deref(), &out),
        Command::Generate {
            checkpoint,
            triples,
            trees,
            mode,
            height,
            beam,
            common,
            out,
        } => commands::generate(&commands::GenerateArgs {
            checkpoint,
            triples,
            trees,
            mode,
            height,
            beam,
            common,
            out,
        }),
        Command::Evaluate {
            triples,
            trees,
            generations,
            gen_trees,
            sentence_bleu,
            system,
            common,
            out,
        } => commands::evaluate(&commands::EvaluateArgs {
            triples,
            trees,
            generations,
            gen_trees,
            sentence_bleu,
            system,
            common,
            out,
        }),
        Command::BuildDataset {
            corpus,
            common,
            split,
            bleu_threshold,
            out,
        } => commands::build_dataset(&corpus, &common, split, bleu_threshold, &out),
        Command::InspectTree {
            trees,
            tree,
            line,
            height,
        } => commands::inspect_tree(trees.as_deref(), tree.as_deref(), line, height),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("error[usage]: {}", first.trim_start_matches("error: "));
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, kind) = classify(&e);
            eprintln!("error[{kind}]: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::from(code)
        }
    }
}
