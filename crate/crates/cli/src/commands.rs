use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synpara::dataset::{build_eval_set, split, BuildOptions, ParsedPair};
use synpara::evaluation::{baselines, bleu, evaluate_system, permutation_test, BleuMode, EvalTriple, MetricReport};
use synpara::inference::Generator;
use synpara::io::{
    format_generations, format_triples, load_checkpoint, load_lexicon, parse_generations, parse_parsed_pairs,
    parse_tree_rows, parse_triples, read_text, save_checkpoint, save_lexicon, to_training_pairs, write_text,
    GenerationRecord,
};
use synpara::text::pretokenize;
use synpara::training::{self, build_lexicon, full_height_examples, PairRecord, TrainConfig, TrainEvent};
use synpara::tree::{leaf_spans, max_height, ConstituencyTree};
use synpara::{Lexicon, Model, Scalar};

use crate::{Common, CorpusArgs, Mode, UsageError};

const CONFIG_ECHO: &str = "config.toml";
const SIGNIFICANCE_ITERATIONS: usize = 10_000;

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        bail!("{}: no such file", path.display());
    }
    Ok(())
}

fn require_dir(path: &Path) -> Result<()> {
    if !path.is_dir() {
        bail!("{}: no such directory", path.display());
    }
    Ok(())
}

/// Config file values with command-line overrides applied.
fn load_config(common: &Common) -> Result<TrainConfig> {
    let mut config = match &common.config {
        Some(path) => {
            require_file(path)?;
            TrainConfig::from_toml(&read_text(path)?).with_context(|| path.display().to_string())?
        }
        None => TrainConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn prepare_out(out: &Path, config: &TrainConfig) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_text(&out.join(CONFIG_ECHO), &config.to_toml())?;
    Ok(())
}

fn load_pairs(corpus: &CorpusArgs) -> Result<Vec<ParsedPair>> {
    require_file(&corpus.pairs)?;
    require_file(&corpus.trees)?;
    Ok(parse_parsed_pairs(&read_text(&corpus.pairs)?, &read_text(&corpus.trees)?)?)
}

fn join_ids(ids: &[usize]) -> String {
    ids.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

pub fn preprocess(corpus: &CorpusArgs, common: &Common, out: &Path) -> Result<()> {
    let config = load_config(common)?;
    let pairs = load_pairs(corpus)?;
    prepare_out(out, &config)?;
    let records = to_training_pairs(&pairs);
    let lexicon = build_lexicon(&records, config.merges, config.vocab_cap)?;
    save_lexicon(out, &lexicon)?;

    let (examples, skipped) = full_height_examples(&records, &lexicon, config.max_len);
    for (i, reason) in &skipped {
        log::warn!("pair {}: {reason}", i + 1);
    }
    let mut text = String::new();
    for ex in &examples {
        let bits: Vec<usize> = ex.bits.iter().map(|&b| b as usize).collect();
        let _ = writeln!(
            text,
            "{}\t{}\t{}",
            join_ids(&ex.source_ids),
            join_ids(&ex.target_ids),
            join_ids(&bits)
        );
    }
    write_text(&out.join("corpus.tsv"), &text)?;
    println!(
        "pairs {}\tusable {}\tskipped {}\tvocab {}\tlabels {}\tmerges {}",
        records.len(),
        examples.len(),
        skipped.len(),
        lexicon.vocab.len(),
        lexicon.labels.len(),
        lexicon.bpe.merges().len()
    );
    Ok(())
}

pub fn train(corpus: &CorpusArgs, common: &Common, lexicon_dir: Option<&Path>, out: &Path) -> Result<()> {
    let config = load_config(common)?;
    let pairs = load_pairs(corpus)?;
    if let Some(dir) = lexicon_dir {
        require_dir(dir)?;
    }
    prepare_out(out, &config)?;
    let records = to_training_pairs(&pairs);
    let lexicon = match lexicon_dir {
        Some(dir) => load_lexicon(dir)?,
        None => build_lexicon(&records, config.merges, config.vocab_cap)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    if config.precision == "f32" {
        run_training::<f32>(&config, &lexicon, &records, &mut rng, out)
    } else {
        run_training::<f64>(&config, &lexicon, &records, &mut rng, out)
    }
}

fn to_io(e: synpara::io::DataError) -> std::io::Error {
    std::io::Error::other(e.to_string())
}

fn run_training<T: Scalar>(
    config: &TrainConfig,
    lexicon: &Lexicon,
    records: &[PairRecord],
    rng: &mut ChaCha8Rng,
    out: &Path,
) -> Result<()> {
    let model_config = config.model_config(lexicon);
    let mut model: Model<T> = Model::new(model_config.clone(), rng.gen());
    let (train_set, val_set) = config.split(records);

    let loss_path = out.join("loss.tsv");
    let mut loss_log = BufWriter::new(File::create(&loss_path).with_context(|| loss_path.display().to_string())?);
    let mut epoch_log = String::new();
    let outcome = training::train(&mut model, lexicon, config, train_set, val_set, rng, |event| {
        match event {
            TrainEvent::Step(s) => writeln!(
                loss_log,
                "{}\t{}\t{}\t{}",
                s.step, s.parts.total, s.parts.token_nll, s.parts.gate_bce
            )?,
            TrainEvent::Epoch(summary, m) => {
                let val = summary.val_loss.map_or_else(|| "-".to_string(), |v| v.to_string());
                let _ = writeln!(epoch_log, "{}\t{}\t{}\t{}", summary.epoch, summary.steps, summary.train_loss, val);
                if summary.epoch % config.checkpoint_every.max(1) == 0 {
                    let dir = out.join(format!("epoch-{}", summary.epoch));
                    save_checkpoint(&dir, &model_config, &m.params, lexicon).map_err(to_io)?;
                }
            }
        }
        Ok(())
    })?;
    loss_log.flush()?;
    write_text(&out.join("epochs.tsv"), &epoch_log)?;
    save_checkpoint(&out.join("best"), &model_config, &outcome.best_params, lexicon)?;
    save_checkpoint(&out.join("final"), &model_config, &model.params, lexicon)?;
    for (i, reason) in &outcome.skipped {
        log::warn!("pair {}: {reason}", i + 1);
    }
    let last = outcome.history.last().map_or(f64::NAN, |e| e.train_loss);
    println!(
        "steps {}\tepochs {}\tfinal_loss {last:.6}\tbest_epoch {}\tskipped {}",
        outcome.steps,
        outcome.history.len(),
        outcome.best_epoch,
        outcome.skipped.len()
    );
    Ok(())
}

pub struct GenerateArgs {
    pub checkpoint: PathBuf,
    pub triples: PathBuf,
    pub trees: PathBuf,
    pub mode: Mode,
    pub height: Option<usize>,
    pub beam: Option<usize>,
    pub common: Common,
    pub out: PathBuf,
}

fn load_triples(triples: &Path, trees: &Path) -> Result<Vec<EvalTriple>> {
    require_file(triples)?;
    require_file(trees)?;
    Ok(parse_triples(&read_text(triples)?, &read_text(trees)?)?)
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let mut config = load_config(&args.common)?;
    if let Some(beam) = args.beam {
        config.beam = beam;
    }
    if config.beam == 0 {
        return Err(UsageError("--beam must be at least 1".into()).into());
    }
    if args.height == Some(0) {
        return Err(UsageError("--height must be at least 1".into()).into());
    }
    if args.mode == Mode::R && args.height.is_some() {
        return Err(UsageError("--height applies to mode f only".into()).into());
    }
    require_dir(&args.checkpoint)?;
    let triples = load_triples(&args.triples, &args.trees)?;
    prepare_out(&args.out, &config)?;

    let (model, lexicon) = load_checkpoint::<f64>(&args.checkpoint)?;
    let generator = Generator {
        model: &model,
        lexicon: &lexicon,
        beam: config.beam,
        max_len: config.max_len,
    };
    let mut records = Vec::with_capacity(triples.len());
    for (i, t) in triples.iter().enumerate() {
        let g = match args.mode {
            Mode::F => generator.generate_f(&t.source, &t.exemplar_tree, args.height),
            Mode::R => generator.generate_r(&t.source, &t.exemplar_tree),
        }
        .with_context(|| format!("triple {}", i + 1))?;
        records.push(GenerationRecord {
            source: t.source.clone(),
            exemplar: t.exemplar.clone(),
            height: g.height,
            generation: g.text,
        });
    }
    write_text(&args.out.join("generations.tsv"), &format_generations(&records))?;
    println!("generated {}", records.len());
    Ok(())
}

pub struct EvaluateArgs {
    pub triples: PathBuf,
    pub trees: PathBuf,
    pub generations: PathBuf,
    pub gen_trees: Option<PathBuf>,
    pub sentence_bleu: bool,
    pub system: String,
    pub common: Common,
    pub out: PathBuf,
}

/// Parses for generations: from a file when given, else by matching the
/// generation against the sentences of the triples.
fn generation_trees(
    gen_trees: Option<&Path>,
    generations: &[GenerationRecord],
    triples: &[EvalTriple],
) -> Result<Vec<Option<ConstituencyTree>>> {
    if let Some(path) = gen_trees {
        require_file(path)?;
        let rows = parse_tree_rows(&read_text(path)?, 1, "generation trees")?;
        if rows.len() != generations.len() {
            bail!("{} trees for {} generations", rows.len(), generations.len());
        }
        return Ok(rows.into_iter().map(|mut r| r.pop()).collect());
    }
    let mut known: HashMap<Vec<String>, &ConstituencyTree> = HashMap::new();
    for t in triples {
        for (s, tree) in [
            (&t.source, &t.source_tree),
            (&t.exemplar, &t.exemplar_tree),
            (&t.reference, &t.reference_tree),
        ] {
            known.entry(pretokenize(s)).or_insert(tree);
        }
    }
    Ok(generations
        .iter()
        .map(|g| known.get(&pretokenize(&g.generation)).map(|t| (*t).clone()))
        .collect())
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let config = load_config(&args.common)?;
    let triples = load_triples(&args.triples, &args.trees)?;
    require_file(&args.generations)?;
    let generations = parse_generations(&read_text(&args.generations)?)?;
    if generations.len() != triples.len() {
        bail!("{} generations for {} triples", generations.len(), triples.len());
    }
    if let Some(i) = generations.iter().zip(&triples).position(|(g, t)| g.source != t.source) {
        bail!("generation {} does not belong to triple {}", i + 1, i + 1);
    }
    let trees = generation_trees(args.gen_trees.as_deref(), &generations, &triples)?;
    prepare_out(&args.out, &config)?;

    let mode = if args.sentence_bleu {
        BleuMode::SentenceMean
    } else {
        BleuMode::Corpus
    };
    let outputs: Vec<String> = generations.iter().map(|g| g.generation.clone()).collect();
    let (row, scores) = evaluate_system(&args.system, &outputs, &trees, &triples, mode)?;
    let [source_row, exemplar_row] = baselines(&triples, mode)?;
    let report = MetricReport {
        rows: vec![source_row, exemplar_row, row],
    };
    write_text(&args.out.join("report.tsv"), &report.to_tsv())?;
    write_text(&args.out.join("report.txt"), &report.to_table())?;

    let sentence = |pick: fn(&EvalTriple) -> &String| -> Vec<f64> {
        triples
            .iter()
            .map(|t| bleu(&pretokenize(pick(t)), &pretokenize(&t.reference)))
            .collect()
    };
    let system_bleu: Vec<f64> = scores.iter().map(|s| s.bleu).collect();
    let mut sig = String::from("comparison\tmetric\tp_value\tsignificant\texact\n");
    for (name, base) in [
        ("Source-as-Output", sentence(|t| &t.source)),
        ("Exemplar-as-Output", sentence(|t| &t.exemplar)),
    ] {
        let r = permutation_test(&system_bleu, &base, SIGNIFICANCE_ITERATIONS, 0.05, config.seed)?;
        let _ = writeln!(
            sig,
            "{} vs {name}\tBLEU\t{:.6}\t{}\t{}",
            args.system, r.p_value, r.significant, r.exact
        );
    }
    write_text(&args.out.join("significance.tsv"), &sig)?;
    let missing = trees.iter().filter(|t| t.is_none()).count();
    if missing > 0 {
        log::warn!("{missing} generations have no parse; TED averages exclude them");
    }
    print!("{}", report.to_table());
    Ok(())
}

pub fn build_dataset(corpus: &CorpusArgs, common: &Common, do_split: bool, bleu_threshold: f64, out: &Path) -> Result<()> {
    let config = load_config(common)?;
    let pairs = load_pairs(corpus)?;
    prepare_out(out, &config)?;
    let options = BuildOptions {
        bleu_threshold,
        ..BuildOptions::default()
    };
    let built = build_eval_set(&pairs, &options)?;
    let (text, trees) = format_triples(&built.triples);
    write_text(&out.join("triples.tsv"), &text)?;
    write_text(&out.join("triple_trees.tsv"), &trees)?;
    if do_split {
        let (test, val) = split(&built.triples, config.test_n, config.val_n, config.seed)?;
        for (name, part) in [("test", &test), ("val", &val)] {
            let (text, trees) = format_triples(part);
            write_text(&out.join(format!("{name}.tsv")), &text)?;
            write_text(&out.join(format!("{name}_trees.tsv")), &trees)?;
        }
    }
    println!(
        "triples {}\ttoo_long {}\tno_candidate {}",
        built.triples.len(),
        built.too_long,
        built.no_candidate
    );
    Ok(())
}

/// Pruned tree, leaf queue, token spans and switch bits as printed text.
pub fn describe_tree(tree: &ConstituencyTree, height: usize) -> String {
    let pruned = tree.strip_terminals().prune(height);
    let mut out = format!("height {height} of {}\n", max_height(tree));
    out.push_str(&pruned.tree().pretty());
    if !out.ends_with('\n') {
        out.push('\n');
    }
    let leaves: Vec<&str> = pruned.leaf_queue().0.iter().map(|&i| pruned.tree().label(i)).collect();
    let _ = writeln!(out, "leaves: {}", leaves.join(" "));
    let tokens = tree.tokens();
    if !tokens.is_empty() {
        let signal = leaf_spans(tree, height);
        let spans: Vec<String> = signal
            .spans
            .iter()
            .zip(&leaves)
            .map(|(r, l)| format!("{l}[{}..{}]={}", r.start + 1, r.end, tokens[r.clone()].join(" ")))
            .collect();
        let _ = writeln!(out, "spans: {}", spans.join(" | "));
        let bits: Vec<String> = signal.bits.iter().map(u8::to_string).collect();
        let _ = writeln!(out, "a = {}", bits.join(" "));
    }
    out
}

pub fn inspect_tree(trees: Option<&Path>, tree: Option<&str>, line: usize, height: usize) -> Result<()> {
    if height == 0 {
        return Err(UsageError("--height must be at least 1".into()).into());
    }
    let text = match (trees, tree) {
        (Some(path), None) => {
            require_file(path)?;
            let content = read_text(path)?;
            let row = content
                .lines()
                .nth(line.saturating_sub(1))
                .with_context(|| format!("{} has no line {line}", path.display()))?;
            row.split('\t').next().unwrap_or_default().to_string()
        }
        (None, Some(t)) => t.to_string(),
        _ => return Err(UsageError("give exactly one of --trees or --tree".into()).into()),
    };
    let tree = ConstituencyTree::parse_bracketed(&text)?;
    print!("{}", describe_tree(&tree, height));
    Ok(())
}
