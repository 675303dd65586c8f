//! Word tokenization, byte-pair encoding and vocabularies.

mod bpe;
mod vocab;

pub use bpe::{BpeModel, END_OF_WORD};
pub use vocab::{ExtendedVocab, Vocab, EOS, PAD, SOS, UNK, UNK_TOKEN};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TextError {
    #[error("cannot train BPE on an empty corpus")]
    EmptyCorpus,
    #[error("token id {id} out of range for vocabulary of size {size}")]
    IdOutOfRange { id: usize, size: usize },
    #[error("malformed {what} file at line {line}: {reason}")]
    Format {
        what: &'static str,
        line: usize,
        reason: String,
    },
}

/// Lowercases, separates punctuation and splits on whitespace.
///
/// Apostrophes and hyphens stay inside tokens so already-split contractions
/// such as `ca n't` survive unchanged.
pub fn pretokenize(sentence: &str) -> Vec<String> {
    let mut spaced = String::with_capacity(sentence.len() + 8);
    for c in sentence.chars().flat_map(char::to_lowercase) {
        if c.is_ascii_punctuation() && c != '\'' && c != '-' {
            spaced.push(' ');
            spaced.push(c);
            spaced.push(' ');
        } else {
            spaced.push(c);
        }
    }
    spaced.split_whitespace().map(str::to_string).collect()
}

/// Joins words back into a single-spaced sentence.
pub fn detokenize<S: AsRef<str>>(words: &[S]) -> String {
    words
        .iter()
        .map(AsRef::as_ref)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Tokenizer word count; the unit used for sentence lengths.
pub fn word_count(sentence: &str) -> usize {
    pretokenize(sentence).len()
}
