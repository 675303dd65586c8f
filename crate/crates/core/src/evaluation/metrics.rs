use std::collections::HashMap;
use std::hash::Hash;

/// Numerator used in place of a zero n-gram match count.
pub const BLEU_EPSILON: f64 = 0.1;
pub const BLEU_MAX_ORDER: usize = 4;

fn ngram_counts<S: AsRef<str> + Eq + Hash>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for w in tokens.windows(n) {
        *counts.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
    }
    counts
}

/// Clipped n-gram matches of `candidate` against `reference`, and the
/// number of candidate n-grams.
pub fn clipped_matches<S: AsRef<str> + Eq + Hash>(candidate: &[S], reference: &[S], n: usize) -> (usize, usize) {
    let cand = ngram_counts(candidate, n);
    let refc = ngram_counts(reference, n);
    let matched = cand
        .iter()
        .map(|(g, &c)| c.min(refc.get(g).copied().unwrap_or(0)))
        .sum();
    (matched, candidate.len().saturating_sub(n - 1))
}

fn brevity_penalty(cand_len: usize, ref_len: usize) -> f64 {
    if cand_len == 0 {
        0.0
    } else if cand_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    }
}

fn combine(matches: &[(usize, usize)], cand_len: usize, ref_len: usize) -> f64 {
    if matches.is_empty() {
        return 0.0;
    }
    let log_sum: f64 = matches
        .iter()
        .map(|&(m, total)| {
            let num = if m == 0 { BLEU_EPSILON } else { m as f64 };
            (num / total.max(1) as f64).ln()
        })
        .sum();
    brevity_penalty(cand_len, ref_len) * (log_sum / matches.len() as f64).exp()
}

/// Sentence BLEU up to 4-grams with brevity penalty. The order drops to
/// the candidate length for shorter candidates, and zero match counts are
/// replaced by [`BLEU_EPSILON`].
pub fn bleu<S: AsRef<str> + Eq + Hash>(candidate: &[S], reference: &[S]) -> f64 {
    let order = BLEU_MAX_ORDER.min(candidate.len());
    let matches: Vec<_> = (1..=order)
        .map(|n| clipped_matches(candidate, reference, n))
        .collect();
    combine(&matches, candidate.len(), reference.len())
}

/// Corpus BLEU: match counts and lengths are summed over all pairs before
/// combining.
pub fn corpus_bleu<S: AsRef<str> + Eq + Hash>(pairs: &[(Vec<S>, Vec<S>)]) -> f64 {
    let longest = pairs.iter().map(|(c, _)| c.len()).max().unwrap_or(0);
    let order = BLEU_MAX_ORDER.min(longest);
    let mut matches = vec![(0, 0); order];
    let (mut c_len, mut r_len) = (0, 0);
    for (cand, reference) in pairs {
        c_len += cand.len();
        r_len += reference.len();
        for (n, slot) in matches.iter_mut().enumerate() {
            let (m, t) = clipped_matches(cand, reference, n + 1);
            slot.0 += m;
            slot.1 += t;
        }
    }
    combine(&matches, c_len, r_len)
}

fn f1(overlap: usize, cand_total: usize, ref_total: usize) -> f64 {
    if overlap == 0 || cand_total == 0 || ref_total == 0 {
        return 0.0;
    }
    let p = overlap as f64 / cand_total as f64;
    let r = overlap as f64 / ref_total as f64;
    2.0 * p * r / (p + r)
}

/// ROUGE-n F1 over clipped n-gram overlap.
pub fn rouge_n<S: AsRef<str> + Eq + Hash>(candidate: &[S], reference: &[S], n: usize) -> f64 {
    let (overlap, cand_total) = clipped_matches(candidate, reference, n);
    f1(overlap, cand_total, reference.len().saturating_sub(n - 1))
}

/// Length of the longest common subsequence.
pub fn lcs_len<S: AsRef<str>>(a: &[S], b: &[S]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F1 from the longest common subsequence.
pub fn rouge_l<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> f64 {
    f1(lcs_len(candidate, reference), candidate.len(), reference.len())
}
