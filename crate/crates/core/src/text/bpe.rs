//! Byte-pair encoding over characters with an end-of-word marker.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use super::TextError;

/// Suffix attached to the final symbol of every word.
pub const END_OF_WORD: &str = "</w>";

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BpeModel {
    merges: Vec<(String, String)>,
    ranks: HashMap<(String, String), usize>,
    /// Merged symbol -> the pair it was built from.
    parts: HashMap<String, (String, String)>,
    alphabet: BTreeSet<char>,
}

/// Splits a word into its initial character symbols.
fn initial_symbols(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    chars
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if i + 1 == chars.len() {
                format!("{c}{END_OF_WORD}")
            } else {
                c.to_string()
            }
        })
        .collect()
}

fn merge_pair(symbols: &[String], left: &str, right: &str) -> Vec<String> {
    let mut out = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && symbols[i] == left && symbols[i + 1] == right {
            out.push(format!("{left}{right}"));
            i += 2;
        } else {
            out.push(symbols[i].clone());
            i += 1;
        }
    }
    out
}

impl BpeModel {
    /// Learns up to `num_merges` merge rules by repeatedly merging the most
    /// frequent adjacent pair. Ties go to the lexicographically smallest pair.
    pub fn train<S: AsRef<str>>(corpus: &[Vec<S>], num_merges: usize) -> Result<Self, TextError> {
        let mut word_freq: BTreeMap<String, usize> = BTreeMap::new();
        for sentence in corpus {
            for word in sentence {
                let word = word.as_ref();
                if !word.is_empty() {
                    *word_freq.entry(word.to_string()).or_default() += 1;
                }
            }
        }
        if word_freq.is_empty() {
            return Err(TextError::EmptyCorpus);
        }
        let alphabet = word_freq.keys().flat_map(|w| w.chars()).collect();
        let mut words: Vec<(Vec<String>, usize)> = word_freq
            .iter()
            .map(|(w, &f)| (initial_symbols(w), f))
            .collect();

        let mut merges = Vec::new();
        while merges.len() < num_merges {
            let mut counts: HashMap<(&str, &str), usize> = HashMap::new();
            for (symbols, freq) in &words {
                for pair in symbols.windows(2) {
                    *counts.entry((&pair[0], &pair[1])).or_default() += freq;
                }
            }
            let best = counts
                .into_iter()
                .max_by(|(pa, ca), (pb, cb)| ca.cmp(cb).then_with(|| pb.cmp(pa)));
            let Some(((left, right), _)) = best else { break };
            let (left, right) = (left.to_string(), right.to_string());
            for (symbols, _) in words.iter_mut() {
                if symbols.len() > 1 {
                    *symbols = merge_pair(symbols, &left, &right);
                }
            }
            merges.push((left, right));
        }
        Ok(Self::from_parts(merges, alphabet))
    }

    pub fn from_parts(merges: Vec<(String, String)>, alphabet: BTreeSet<char>) -> Self {
        let ranks = merges
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i))
            .collect();
        let parts = merges
            .iter()
            .map(|(l, r)| (format!("{l}{r}"), (l.clone(), r.clone())))
            .collect();
        BpeModel {
            merges,
            ranks,
            parts,
            alphabet,
        }
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn alphabet(&self) -> &BTreeSet<char> {
        &self.alphabet
    }

    /// Segments one word by applying merges in rule order.
    pub fn segment_word(&self, word: &str) -> Vec<String> {
        let mut symbols = initial_symbols(word);
        loop {
            let best = symbols
                .windows(2)
                .filter_map(|p| self.ranks.get(&(p[0].clone(), p[1].clone())))
                .min()
                .copied();
            let Some(rank) = best else { break };
            let (left, right) = &self.merges[rank];
            symbols = merge_pair(&symbols, left, right);
        }
        symbols
    }

    /// Segments a pretokenized sentence into subword symbols.
    pub fn segment<S: AsRef<str>>(&self, words: &[S]) -> Vec<String> {
        words
            .iter()
            .flat_map(|w| self.segment_word(w.as_ref()))
            .collect()
    }

    /// Undoes merges on `symbol` until every piece satisfies `known`.
    pub fn split_until(&self, symbol: &str, known: &dyn Fn(&str) -> bool, out: &mut Vec<String>) {
        if known(symbol) {
            out.push(symbol.to_string());
            return;
        }
        match self.parts.get(symbol) {
            Some((l, r)) => {
                self.split_until(l, known, out);
                self.split_until(r, known, out);
            }
            None => out.push(symbol.to_string()),
        }
    }

    /// Whether every character of the symbol (marker excluded) is in the
    /// training alphabet.
    pub fn in_alphabet(&self, symbol: &str) -> bool {
        symbol
            .strip_suffix(END_OF_WORD)
            .unwrap_or(symbol)
            .chars()
            .all(|c| self.alphabet.contains(&c))
    }

    /// Line-oriented text form: an alphabet header, then one merge per line.
    pub fn to_text(&self) -> String {
        let mut out = String::from("#alphabet ");
        out.extend(self.alphabet.iter());
        out.push('\n');
        for (l, r) in &self.merges {
            let _ = writeln!(out, "{l} {r}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, TextError> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        let alphabet = header
            .strip_prefix("#alphabet ")
            .or_else(|| header.strip_prefix("#alphabet"))
            .ok_or_else(|| TextError::Format {
                what: "BPE model",
                line: 1,
                reason: "missing '#alphabet' header".into(),
            })?
            .chars()
            .collect();
        let mut merges = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let mut it = line.split(' ');
            match (it.next(), it.next(), it.next()) {
                (Some(l), Some(r), None) if !l.is_empty() && !r.is_empty() => {
                    merges.push((l.to_string(), r.to_string()))
                }
                _ => {
                    return Err(TextError::Format {
                        what: "BPE model",
                        line: i + 2,
                        reason: format!("expected two symbols, got '{line}'"),
                    })
                }
            }
        }
        Ok(Self::from_parts(merges, alphabet))
    }
}
