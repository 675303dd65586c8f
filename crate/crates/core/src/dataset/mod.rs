//! Evaluation triples from paraphrase pairs: for each pair pick, from the
//! pool of all corpus sentences, the syntactically closest exemplar for the
//! reference that is similar in length and not too close to the source.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::evaluation::{bleu, EvalTriple};
use crate::text::{pretokenize, word_count};
use crate::tree::{ted, ConstituencyTree, SyntaxSkeleton};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DatasetError {
    #[error("need at least {need} pairs, got {got}")]
    TooFewPairs { need: usize, got: usize },
    #[error("no pair has a surviving exemplar candidate")]
    NoCandidates,
    #[error("cannot take {test} test and {val} validation triples from {available}")]
    SplitTooLarge { test: usize, val: usize, available: usize },
}

/// A sentence pair with both parses.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedPair {
    pub source: String,
    pub target: String,
    pub source_tree: ConstituencyTree,
    pub target_tree: ConstituencyTree,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    /// Pairs with a side longer than this many words are dropped.
    pub max_tokens: usize,
    /// Largest allowed word-count difference between candidate and reference.
    pub max_length_diff: usize,
    /// Candidates with BLEU(source, candidate) above this are dropped.
    pub bleu_threshold: f64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            max_tokens: 30,
            max_length_diff: 2,
            bleu_threshold: 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildOutcome {
    pub triples: Vec<EvalTriple>,
    /// Pairs dropped for length.
    pub too_long: usize,
    /// Pairs with no surviving candidate.
    pub no_candidate: usize,
}

struct PoolEntry<'a> {
    text: &'a str,
    words: Vec<String>,
    tree: &'a ConstituencyTree,
    skeleton: SyntaxSkeleton,
}

/// Builds one triple per usable pair, in corpus order.
///
/// The pool holds every distinct sentence of the retained pairs in first
/// occurrence order. TED ties go to the earliest pool entry.
pub fn build_eval_set(pairs: &[ParsedPair], options: &BuildOptions) -> Result<BuildOutcome, DatasetError> {
    if pairs.len() < 2 {
        return Err(DatasetError::TooFewPairs {
            need: 2,
            got: pairs.len(),
        });
    }
    let retained: Vec<&ParsedPair> = pairs
        .iter()
        .filter(|p| word_count(&p.source) <= options.max_tokens && word_count(&p.target) <= options.max_tokens)
        .collect();
    let too_long = pairs.len() - retained.len();

    let mut pool: Vec<PoolEntry> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for p in &retained {
        for (text, tree) in [(&p.source, &p.source_tree), (&p.target, &p.target_tree)] {
            if !index.contains_key(text.as_str()) {
                index.insert(text, pool.len());
                pool.push(PoolEntry {
                    text,
                    words: pretokenize(text),
                    tree,
                    skeleton: tree.strip_terminals(),
                });
            }
        }
    }

    let mut ted_cache: HashMap<(usize, usize), usize> = HashMap::new();
    let mut triples = Vec::new();
    let mut no_candidate = 0;
    for p in &retained {
        let xi = index[p.source.as_str()];
        let zi = index[p.target.as_str()];
        let x_words = &pool[xi].words;
        let z_len = pool[zi].words.len();
        let mut best: Option<(usize, usize)> = None;
        for (ci, c) in pool.iter().enumerate() {
            if ci == xi || ci == zi || c.words.len().abs_diff(z_len) > options.max_length_diff {
                continue;
            }
            if bleu(x_words, &c.words) > options.bleu_threshold {
                continue;
            }
            let d = *ted_cache
                .entry((zi, ci))
                .or_insert_with(|| ted(&pool[zi].skeleton, &c.skeleton));
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((ci, d));
            }
        }
        match best {
            Some((yi, _)) => triples.push(EvalTriple {
                source: p.source.clone(),
                exemplar: pool[yi].text.to_string(),
                reference: p.target.clone(),
                source_tree: p.source_tree.clone(),
                exemplar_tree: pool[yi].tree.clone(),
                reference_tree: p.target_tree.clone(),
            }),
            None => no_candidate += 1,
        }
    }
    if triples.is_empty() {
        return Err(DatasetError::NoCandidates);
    }
    Ok(BuildOutcome {
        triples,
        too_long,
        no_candidate,
    })
}

/// Disjoint seeded random test and validation subsets.
pub fn split<T: Clone>(items: &[T], test_n: usize, val_n: usize, seed: u64) -> Result<(Vec<T>, Vec<T>), DatasetError> {
    if test_n + val_n > items.len() {
        return Err(DatasetError::SplitTooLarge {
            test: test_n,
            val: val_n,
            available: items.len(),
        });
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick = |ids: &[usize]| ids.iter().map(|&i| items[i].clone()).collect();
    Ok((pick(&order[..test_n]), pick(&order[test_n..test_n + val_n])))
}
