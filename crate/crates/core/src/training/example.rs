use std::fmt;

use crate::model::CopySource;
use crate::text::{pretokenize, BpeModel, ExtendedVocab, Vocab, EOS};
use crate::tree::{leaf_spans, ConstituencyTree, PrunedTree, SignallingVector};

/// A sentence with its paraphrase and the paraphrase's parse.
#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub source: String,
    pub target: String,
    pub tree: ConstituencyTree,
}

/// One model-ready training instance at a fixed pruning height.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedExample {
    /// Base-vocabulary ids of the source subwords.
    pub source_ids: Vec<usize>,
    pub copy: CopySource,
    /// Extended-vocabulary ids of the target subwords, EOS last.
    pub target_ids: Vec<usize>,
    /// Queue switch bit per target position; the EOS slot is 0.
    pub bits: Vec<u8>,
    pub exemplar: PrunedTree,
    /// Word-level signalling vector.
    pub signal: SignallingVector,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SkipReason {
    EmptySide,
    Misaligned { words: usize, terminals: usize },
    EmptySpan,
    TooLong { len: usize, max: usize },
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SkipReason::EmptySide => write!(f, "empty sentence"),
            SkipReason::Misaligned { words, terminals } => {
                write!(f, "target has {words} words but its tree has {terminals} terminals")
            }
            SkipReason::EmptySpan => write!(f, "tree has a constituent without terminals"),
            SkipReason::TooLong { len, max } => write!(f, "{len} subwords exceed the limit of {max}"),
        }
    }
}

/// Builds the training instance for `pair` with the paraphrase serving as
/// its own exemplar, pruned at `height`.
pub fn make_training_example(
    pair: &PairRecord,
    bpe: &BpeModel,
    vocab: &Vocab,
    height: usize,
    max_len: usize,
) -> Result<AlignedExample, SkipReason> {
    let source_words = pretokenize(&pair.source);
    let target_words = pretokenize(&pair.target);
    if source_words.is_empty() || target_words.is_empty() {
        return Err(SkipReason::EmptySide);
    }
    let terminals: Vec<String> = pair.tree.tokens().iter().map(|t| t.to_lowercase()).collect();
    if terminals != target_words {
        return Err(SkipReason::Misaligned {
            words: target_words.len(),
            terminals: terminals.len(),
        });
    }

    let source_symbols = vocab.symbols(bpe, &source_words);
    if source_symbols.len() > max_len {
        return Err(SkipReason::TooLong {
            len: source_symbols.len(),
            max: max_len,
        });
    }
    let ext = ExtendedVocab::new(vocab, &source_symbols);

    let signal = leaf_spans(&pair.tree, height);
    let exemplar = pair.tree.strip_terminals().prune(height);
    if signal.spans.len() != exemplar.leaf_queue().len() {
        return Err(SkipReason::EmptySpan);
    }

    let mut target_ids = Vec::new();
    let mut bits = Vec::new();
    for (word, &bit) in target_words.iter().zip(&signal.bits) {
        for (k, sym) in vocab.symbols(bpe, std::slice::from_ref(word)).iter().enumerate() {
            target_ids.push(ext.id(sym));
            bits.push(if k == 0 { bit } else { 0 });
        }
    }
    target_ids.push(EOS);
    bits.push(0);
    if target_ids.len() > max_len {
        return Err(SkipReason::TooLong {
            len: target_ids.len(),
            max: max_len,
        });
    }

    Ok(AlignedExample {
        source_ids: source_symbols.iter().map(|s| vocab.id(s)).collect(),
        copy: CopySource {
            ext_ids: source_symbols.iter().map(|s| ext.id(s)).collect(),
            ext_len: ext.len(),
        },
        target_ids,
        bits,
        exemplar,
        signal,
        height,
    })
}
