use std::collections::{BTreeMap, HashMap, HashSet};

use super::{BpeModel, TextError, END_OF_WORD};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const SOS: usize = 2;
pub const EOS: usize = 3;

pub const UNK_TOKEN: &str = "<unk>";
const RESERVED: [&str; 4] = ["<pad>", UNK_TOKEN, "<sos>", "<eos>"];

/// Dense token <-> id map with four reserved entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocab { tokens, index }
    }

    /// Builds a vocabulary of at most `max_size` entries from subword
    /// sequences.
    ///
    /// Both forms of every alphabet character (plain and word-final) are
    /// admitted first so that any word over the training alphabet stays
    /// encodable; the remaining slots go to the most frequent symbols, ties
    /// broken lexicographically.
    pub fn build<S: AsRef<str>>(bpe: &BpeModel, sequences: &[Vec<S>], max_size: usize) -> Self {
        let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
        for seq in sequences {
            for sym in seq {
                *freq.entry(sym.as_ref()).or_default() += 1;
            }
        }
        let mut by_freq: Vec<(&str, usize)> = freq.into_iter().collect();
        by_freq.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let cap = max_size.max(RESERVED.len());
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let mut seen: HashSet<String> = tokens.iter().cloned().collect();
        let base = bpe
            .alphabet()
            .iter()
            .flat_map(|c| [c.to_string(), format!("{c}{END_OF_WORD}")]);
        let frequent = by_freq.iter().map(|(s, _)| s.to_string());
        for sym in base.chain(frequent) {
            if tokens.len() >= cap {
                break;
            }
            if seen.insert(sym.clone()) {
                tokens.push(sym);
            }
        }
        Self::from_tokens(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Id of `token`, or UNK.
    pub fn id(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Result<&str, TextError> {
        self.tokens
            .get(id)
            .map(String::as_str)
            .ok_or(TextError::IdOutOfRange {
                id,
                size: self.len(),
            })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Segments words into subword symbols that are all present in this
    /// vocabulary where possible; merged symbols missing from the vocabulary
    /// are split back along their merge history.
    pub fn symbols<S: AsRef<str>>(&self, bpe: &BpeModel, words: &[S]) -> Vec<String> {
        let known = |s: &str| self.index.contains_key(s);
        let mut out = Vec::new();
        for sym in bpe.segment(words) {
            bpe.split_until(&sym, &known, &mut out);
        }
        out
    }

    /// Subword ids for a sentence (no SOS/EOS).
    pub fn encode(&self, bpe: &BpeModel, sentence: &str) -> Vec<usize> {
        let words = super::pretokenize(sentence);
        self.symbols(bpe, &words)
            .iter()
            .map(|s| self.id(s))
            .collect()
    }

    /// Joins subword ids back into words. UNK renders as `<unk>`.
    pub fn decode(&self, ids: &[usize]) -> Result<String, TextError> {
        let symbols = ids
            .iter()
            .map(|&id| self.token(id).map(str::to_string))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(join_symbols(&symbols))
    }

    /// One token per line in id order.
    pub fn to_text(&self) -> String {
        let mut out = self.tokens.join("\n");
        out.push('\n');
        out
    }

    pub fn from_text(text: &str) -> Result<Self, TextError> {
        let tokens: Vec<String> = text.lines().map(str::to_string).collect();
        for (i, reserved) in RESERVED.iter().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(*reserved) {
                return Err(TextError::Format {
                    what: "vocabulary",
                    line: i + 1,
                    reason: format!("expected reserved token {reserved}"),
                });
            }
        }
        let vocab = Self::from_tokens(tokens);
        if vocab.index.len() != vocab.tokens.len() {
            return Err(TextError::Format {
                what: "vocabulary",
                line: 0,
                reason: "duplicate token".into(),
            });
        }
        Ok(vocab)
    }
}

/// Concatenates subword symbols, turning end-of-word markers into spaces.
pub(crate) fn join_symbols<S: AsRef<str>>(symbols: &[S]) -> String {
    let mut out = String::new();
    for sym in symbols {
        let sym = sym.as_ref();
        if let Some(stem) = sym.strip_suffix(END_OF_WORD) {
            out.push_str(stem);
            out.push(' ');
        } else {
            out.push_str(sym);
        }
    }
    out.trim_end().to_string()
}

/// Base vocabulary plus the out-of-vocabulary symbols of one source
/// sentence, numbered from `base.len()` upwards.
#[derive(Debug, Clone)]
pub struct ExtendedVocab<'v> {
    base: &'v Vocab,
    extra: Vec<String>,
    extra_index: HashMap<String, usize>,
}

impl<'v> ExtendedVocab<'v> {
    pub fn new<S: AsRef<str>>(base: &'v Vocab, source_symbols: &[S]) -> Self {
        let mut extra = Vec::new();
        let mut extra_index = HashMap::new();
        for sym in source_symbols {
            let sym = sym.as_ref();
            if base.get(sym).is_none() && !extra_index.contains_key(sym) {
                extra_index.insert(sym.to_string(), base.len() + extra.len());
                extra.push(sym.to_string());
            }
        }
        ExtendedVocab {
            base,
            extra,
            extra_index,
        }
    }

    pub fn base(&self) -> &Vocab {
        self.base
    }

    pub fn extension(&self) -> &[String] {
        &self.extra
    }

    pub fn len(&self) -> usize {
        self.base.len() + self.extra.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Extended id: base id, then extension id, else UNK.
    pub fn id(&self, symbol: &str) -> usize {
        self.base
            .get(symbol)
            .or_else(|| self.extra_index.get(symbol).copied())
            .unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Result<&str, TextError> {
        if id < self.base.len() {
            self.base.token(id)
        } else {
            self.extra
                .get(id - self.base.len())
                .map(String::as_str)
                .ok_or(TextError::IdOutOfRange {
                    id,
                    size: self.len(),
                })
        }
    }

    /// Id usable as a decoder input: extension ids fall back to UNK.
    pub fn input_id(&self, id: usize) -> usize {
        if id < self.base.len() {
            id
        } else {
            UNK
        }
    }

    pub fn decode(&self, ids: &[usize]) -> Result<String, TextError> {
        let symbols = ids
            .iter()
            .map(|&id| self.token(id))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(join_symbols(&symbols))
    }
}
