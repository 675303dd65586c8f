//! Exhaustive re-implementation of exemplar selection, for comparison with
//! the library builder.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synpara::dataset::ParsedPair;
use synpara::evaluation::bleu;
use synpara::text::pretokenize;
use synpara::tree::ted;
use synpara::ConstituencyTree;

use crate::synthetic::{long_sentence, sentence, variant, Syn};

/// 46 grammar pairs whose sources come in near-duplicate families, two
/// pairs with a side longer than 30 words, and two hand-built pairs. In the
/// latter, the reference's only structural near-twin is three words longer
/// and sits first in the pool.
pub fn corpus(seed: u64) -> Vec<ParsedPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let make = |x: &Syn, z: &Syn| ParsedPair {
        source: x.text(),
        target: z.text(),
        source_tree: x.tree(),
        target_tree: z.tree(),
    };
    let mut pairs = Vec::new();
    let mut sources: Vec<Syn> = Vec::new();
    for i in 0..46 {
        let x = if i % 2 == 1 {
            variant(&mut rng, &sources[i - 1])
        } else {
            sentence(&mut rng)
        };
        let z = if rng.gen_bool(0.2) {
            variant(&mut rng, &x)
        } else if i > 4 && rng.gen_bool(0.25) {
            let k = rng.gen_range(0..sources.len());
            variant(&mut rng, &sources[k])
        } else {
            sentence(&mut rng)
        };
        pairs.push(make(&x, &z));
        sources.push(x);
    }
    let long = long_sentence(&mut rng);
    pairs.insert(10, make(&long, &sentence(&mut rng)));
    let long = long_sentence(&mut rng);
    pairs.insert(30, make(&sentence(&mut rng), &long));

    let parsed = |text: &str, tree: &str| (text.to_string(), ConstituencyTree::parse_bracketed(tree).expect("valid"));
    let (twin, twin_tree) = parsed(
        "is the old cat very big now ?",
        "(ROOT (SQ (VBZ is) (NP (DT the) (JJ old) (NN cat)) (ADJP (RB very) (JJ big) (RB now)) (. ?)))",
    );
    let (question, question_tree) = parsed(
        "is the cat big ?",
        "(ROOT (SQ (VBZ is) (NP (DT the) (NN cat)) (ADJP (JJ big)) (. ?)))",
    );
    let filler = sentence(&mut rng);
    pairs.insert(
        0,
        ParsedPair {
            source: twin,
            target: filler.text(),
            source_tree: twin_tree,
            target_tree: filler.tree(),
        },
    );
    let (source, source_tree) = parsed(
        "where was a dog ?",
        "(ROOT (SBARQ (WHADVP (WRB where)) (SQ (VBD was) (NP (DT a) (NN dog))) (. ?)))",
    );
    pairs.insert(
        20,
        ParsedPair {
            source,
            target: question,
            source_tree,
            target_tree: question_tree,
        },
    );
    pairs
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chosen {
    pub source: String,
    pub exemplar: String,
    pub reference: String,
    pub exemplar_tree: ConstituencyTree,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scan {
    pub chosen: Vec<Chosen>,
    pub too_long: usize,
    pub no_candidate: usize,
    /// Every `BLEU(X, C)` evaluated after the length filter.
    pub bleu_values: Vec<f64>,
}

pub fn scan(pairs: &[ParsedPair], max_tokens: usize, max_length_diff: usize, keep: impl Fn(f64) -> bool) -> Scan {
    let words = |s: &str| pretokenize(s).len();
    let kept: Vec<&ParsedPair> = pairs
        .iter()
        .filter(|p| words(&p.source) <= max_tokens && words(&p.target) <= max_tokens)
        .collect();
    let mut pool: Vec<(&str, &ConstituencyTree)> = Vec::new();
    for p in &kept {
        for (s, t) in [(&p.source, &p.source_tree), (&p.target, &p.target_tree)] {
            if !pool.iter().any(|(q, _)| q == s) {
                pool.push((s, t));
            }
        }
    }
    let mut out = Scan {
        chosen: Vec::new(),
        too_long: pairs.len() - kept.len(),
        no_candidate: 0,
        bleu_values: Vec::new(),
    };
    for p in &kept {
        let z_len = words(&p.target) as i64;
        let mut survivors: Vec<(usize, usize)> = Vec::new();
        for (i, (c, tree)) in pool.iter().enumerate() {
            if *c == p.source || *c == p.target {
                continue;
            }
            if (words(c) as i64 - z_len).unsigned_abs() as usize > max_length_diff {
                continue;
            }
            let b = bleu(&pretokenize(&p.source), &pretokenize(c));
            out.bleu_values.push(b);
            if !keep(b) {
                continue;
            }
            let d = ted(&p.target_tree.strip_terminals(), &tree.strip_terminals());
            survivors.push((d, i));
        }
        survivors.sort();
        match survivors.first() {
            Some(&(_, i)) => out.chosen.push(Chosen {
                source: p.source.clone(),
                exemplar: pool[i].0.to_string(),
                reference: p.target.clone(),
                exemplar_tree: pool[i].1.clone(),
            }),
            None => out.no_candidate += 1,
        }
    }
    out
}
