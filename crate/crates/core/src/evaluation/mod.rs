//! Alignment metrics (BLEU, ROUGE), syntactic transfer (TED against the
//! exemplar and the reference), copy baselines, significance testing and
//! the report table.

mod metrics;
mod significance;

pub use metrics::{
    bleu, clipped_matches, corpus_bleu, lcs_len, rouge_l, rouge_n, BLEU_EPSILON, BLEU_MAX_ORDER,
};
pub use significance::{permutation_test, PermutationResult};

use std::fmt::Write as _;

use thiserror::Error;

use crate::text::pretokenize;
use crate::tree::{ted, ConstituencyTree};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("paired samples differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("no examples to evaluate")]
    Empty,
}

/// Column names, in report order.
pub const METRIC_NAMES: [&str; 6] = ["BLEU", "ROUGE-1", "ROUGE-2", "ROUGE-L", "TED-R", "TED-E"];

/// Source sentence, syntactic exemplar and reference paraphrase.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalTriple {
    pub source: String,
    pub exemplar: String,
    pub reference: String,
    pub source_tree: ConstituencyTree,
    pub exemplar_tree: ConstituencyTree,
    pub reference_tree: ConstituencyTree,
}

/// Tree edit distances of a generation's skeleton to the exemplar's
/// (TED-E) and the reference's (TED-R).
pub fn ted_metrics(
    generation: &ConstituencyTree,
    exemplar: &ConstituencyTree,
    reference: &ConstituencyTree,
) -> (usize, usize) {
    let g = generation.strip_terminals();
    (
        ted(&g, &exemplar.strip_terminals()),
        ted(&g, &reference.strip_terminals()),
    )
}

/// Metric values for one output against one triple. Alignment metrics are
/// in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExampleScores {
    pub bleu: f64,
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_l: f64,
    pub ted_r: Option<f64>,
    pub ted_e: Option<f64>,
}

pub fn score_example(output: &str, output_tree: Option<&ConstituencyTree>, triple: &EvalTriple) -> ExampleScores {
    let cand = pretokenize(output);
    let reference = pretokenize(&triple.reference);
    let teds = output_tree.map(|t| ted_metrics(t, &triple.exemplar_tree, &triple.reference_tree));
    ExampleScores {
        bleu: bleu(&cand, &reference),
        rouge1: rouge_n(&cand, &reference, 1),
        rouge2: rouge_n(&cand, &reference, 2),
        rouge_l: rouge_l(&cand, &reference),
        ted_e: teds.map(|(e, _)| e as f64),
        ted_r: teds.map(|(_, r)| r as f64),
    }
}

/// One system's mean scores. Alignment metrics are stored ×100.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub system: String,
    pub count: usize,
    pub bleu: f64,
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_l: f64,
    /// Mean over examples whose output has a tree; `None` if none do.
    pub ted_r: Option<f64>,
    pub ted_e: Option<f64>,
}

impl MetricRow {
    pub fn values(&self) -> [Option<f64>; 6] {
        [
            Some(self.bleu),
            Some(self.rouge1),
            Some(self.rouge2),
            Some(self.rouge_l),
            self.ted_r,
            self.ted_e,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BleuMode {
    #[default]
    Corpus,
    SentenceMean,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Scores `outputs` against `triples` and aggregates by mean.
pub fn evaluate_system(
    system: &str,
    outputs: &[String],
    output_trees: &[Option<ConstituencyTree>],
    triples: &[EvalTriple],
    mode: BleuMode,
) -> Result<(MetricRow, Vec<ExampleScores>), EvalError> {
    if outputs.len() != triples.len() || output_trees.len() != triples.len() {
        return Err(EvalError::LengthMismatch {
            left: outputs.len(),
            right: triples.len(),
        });
    }
    if triples.is_empty() {
        return Err(EvalError::Empty);
    }
    let scores: Vec<ExampleScores> = outputs
        .iter()
        .zip(output_trees)
        .zip(triples)
        .map(|((o, t), tr)| score_example(o, t.as_ref(), tr))
        .collect();
    let bleu_value = match mode {
        BleuMode::Corpus => {
            let pairs: Vec<(Vec<String>, Vec<String>)> = outputs
                .iter()
                .zip(triples)
                .map(|(o, t)| (pretokenize(o), pretokenize(&t.reference)))
                .collect();
            corpus_bleu(&pairs)
        }
        BleuMode::SentenceMean => mean(scores.iter().map(|s| s.bleu)).unwrap_or(0.0),
    };
    let row = MetricRow {
        system: system.to_string(),
        count: triples.len(),
        bleu: 100.0 * bleu_value,
        rouge1: 100.0 * mean(scores.iter().map(|s| s.rouge1)).unwrap_or(0.0),
        rouge2: 100.0 * mean(scores.iter().map(|s| s.rouge2)).unwrap_or(0.0),
        rouge_l: 100.0 * mean(scores.iter().map(|s| s.rouge_l)).unwrap_or(0.0),
        ted_r: mean(scores.iter().filter_map(|s| s.ted_r)),
        ted_e: mean(scores.iter().filter_map(|s| s.ted_e)),
    };
    Ok((row, scores))
}

/// Source-as-Output and Exemplar-as-Output rows.
pub fn baselines(triples: &[EvalTriple], mode: BleuMode) -> Result<[MetricRow; 2], EvalError> {
    let run = |name: &str, pick: fn(&EvalTriple) -> (&String, &ConstituencyTree)| {
        let outputs: Vec<String> = triples.iter().map(|t| pick(t).0.clone()).collect();
        let trees: Vec<Option<ConstituencyTree>> = triples.iter().map(|t| Some(pick(t).1.clone())).collect();
        evaluate_system(name, &outputs, &trees, triples, mode).map(|(row, _)| row)
    };
    Ok([
        run("Source-as-Output", |t| (&t.source, &t.source_tree))?,
        run("Exemplar-as-Output", |t| (&t.exemplar, &t.exemplar_tree))?,
    ])
}

/// Collection of system rows rendered as a text table or TSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"))
}

impl MetricReport {
    pub fn to_tsv(&self) -> String {
        let mut out = format!("system\tn\t{}\n", METRIC_NAMES.join("\t"));
        for r in &self.rows {
            let vals: Vec<String> = r.values().iter().map(|&v| cell(v)).collect();
            let _ = writeln!(out, "{}\t{}\t{}", r.system, r.count, vals.join("\t"));
        }
        out
    }

    pub fn to_table(&self) -> String {
        let name_w = self.rows.iter().map(|r| r.system.len()).max().unwrap_or(0).max(6);
        let mut out = format!("{:<name_w$}  {:>5}", "system", "n");
        for m in METRIC_NAMES {
            let _ = write!(out, "  {m:>8}");
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{:<name_w$}  {:>5}", r.system, r.count);
            for v in r.values() {
                let _ = write!(out, "  {:>8}", cell(v));
            }
            out.push('\n');
        }
        out
    }
}
