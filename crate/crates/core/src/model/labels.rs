use std::collections::{BTreeSet, HashMap};

use crate::tree::ConstituencyTree;

pub const UNK_TAG: &str = "<UNK-TAG>";

/// Nonterminal label ids for the tree encoder; id 0 is [`UNK_TAG`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVocab {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelVocab {
    /// Collects every non-token label, sorted.
    pub fn build<'a>(trees: impl IntoIterator<Item = &'a ConstituencyTree>) -> Self {
        let mut seen = BTreeSet::new();
        for tree in trees {
            for node in tree.nodes() {
                if node.token.is_none() {
                    seen.insert(node.label.clone());
                }
            }
        }
        seen.remove(UNK_TAG);
        Self::from_labels(seen)
    }

    /// Builds from an explicit label list; a leading [`UNK_TAG`] is added
    /// if absent.
    pub fn from_labels<S: AsRef<str>>(labels: impl IntoIterator<Item = S>) -> Self {
        let mut out = vec![UNK_TAG.to_string()];
        for l in labels {
            let l = l.as_ref();
            if l != UNK_TAG && !out.iter().any(|x| x == l) {
                out.push(l.to_string());
            }
        }
        let index = out.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        LabelVocab { labels: out, index }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn id(&self, label: &str) -> usize {
        self.index.get(label).copied().unwrap_or(0)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn to_text(&self) -> String {
        self.labels.iter().map(|l| format!("{l}\n")).collect()
    }

    pub fn from_text(text: &str) -> Self {
        Self::from_labels(text.lines().filter(|l| !l.is_empty()))
    }
}
