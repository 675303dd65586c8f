//! Two complete toy runs of the command-line pipeline with one seed.

use std::path::{Path, PathBuf};
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_synpara");

const CONFIG: &str = "\
lr = 0.003
batch = 8
epochs = 4
emb = 16
hidden = 16
layers = 2
merges = 100
seed = 42
beam = 3
validation = 0.25
";

fn run(args: &[&str]) -> Result<(), String> {
    let out = Command::new(BIN).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "synpara {} failed: {}",
            args.first().copied().unwrap_or_default(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(())
}

fn pipeline(root: &Path, fixtures: &Path) -> Result<Vec<PathBuf>, String> {
    let p = |name: &str| root.join(name).to_string_lossy().into_owned();
    let f = |name: &str| fixtures.join(name).to_string_lossy().into_owned();
    std::fs::write(root.join("config.toml"), CONFIG).map_err(|e| e.to_string())?;
    let (pairs, trees) = (f("toy_pairs.tsv"), f("toy_trees.tsv"));
    let corpus = ["--pairs", pairs.as_str(), "--trees", trees.as_str()];
    let config = p("config.toml");

    let prep_out = p("prep");
    run(&[&["preprocess"], &corpus[..], &["--config", &config, "--out", &prep_out]].concat())?;
    let data_out = p("data");
    run(&[&["build-dataset"], &corpus[..], &["--config", &config, "--out", &data_out]].concat())?;
    let train_out = p("train");
    run(&[&["train"], &corpus[..], &["--config", &config, "--out", &train_out]].concat())?;
    let (triples, triple_trees) = (p("data/triples.tsv"), p("data/triple_trees.tsv"));
    let (best, gen_out, eval_out) = (p("train/best"), p("gen"), p("eval"));
    run(&[
        "generate",
        "--checkpoint",
        &best,
        "--triples",
        &triples,
        "--trees",
        &triple_trees,
        "--config",
        &config,
        "--out",
        &gen_out,
    ])?;
    let generations = p("gen/generations.tsv");
    run(&[
        "evaluate",
        "--triples",
        &triples,
        "--trees",
        &triple_trees,
        "--generations",
        &generations,
        "--config",
        &config,
        "--out",
        &eval_out,
    ])?;
    let report = std::fs::read_to_string(root.join("eval/report.tsv")).map_err(|e| e.to_string())?;
    for column in synpara::evaluation::METRIC_NAMES {
        if !report.lines().next().unwrap_or_default().split('\t').any(|c| c == column) {
            return Err(format!("report lacks column {column}"));
        }
    }
    Ok([
        "prep/corpus.tsv",
        "data/triples.tsv",
        "train/loss.tsv",
        "train/epochs.tsv",
        "train/best/params.bin",
        "gen/generations.tsv",
        "eval/report.tsv",
        "eval/report.txt",
        "eval/significance.tsv",
    ]
    .iter()
    .map(PathBuf::from)
    .collect())
}

/// Runs the pipeline twice and returns how many outputs were compared.
pub fn compare_runs(fixtures: &Path) -> Result<usize, String> {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let files = pipeline(a.path(), fixtures)?;
    pipeline(b.path(), fixtures)?;
    for f in &files {
        let x = std::fs::read(a.path().join(f)).map_err(|e| format!("{}: {e}", f.display()))?;
        let y = std::fs::read(b.path().join(f)).map_err(|e| format!("{}: {e}", f.display()))?;
        if x != y {
            return Err(format!("{} differs between runs", f.display()));
        }
    }
    Ok(files.len())
}
