//! Random trees and a small phrase grammar for building corpora.

use rand::seq::SliceRandom;
use rand::Rng;
use synpara::ConstituencyTree;

const NOUNS: [&str; 8] = ["cat", "dog", "bird", "fish", "man", "woman", "car", "house"];
const ADJS: [&str; 4] = ["big", "small", "red", "old"];
const VERBS: [&str; 5] = ["saw", "liked", "found", "took", "sat"];
const PREPS: [&str; 4] = ["on", "in", "near", "under"];
const DETS: [&str; 2] = ["the", "a"];

/// A generated parse with words at the preterminals.
#[derive(Debug, Clone)]
pub enum Syn {
    Word(&'static str, String),
    Phrase(&'static str, Vec<Syn>),
}

impl Syn {
    fn bracketed(&self, out: &mut String) {
        match self {
            Syn::Word(tag, w) => out.push_str(&format!("({tag} {w})")),
            Syn::Phrase(label, kids) => {
                out.push('(');
                out.push_str(label);
                for k in kids {
                    out.push(' ');
                    k.bracketed(out);
                }
                out.push(')');
            }
        }
    }

    fn words<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Syn::Word(_, w) => out.push(w),
            Syn::Phrase(_, kids) => kids.iter().for_each(|k| k.words(out)),
        }
    }

    fn leaves_mut<'a>(&'a mut self, out: &mut Vec<(&'static str, &'a mut String)>) {
        match self {
            Syn::Word(tag, w) => out.push((tag, w)),
            Syn::Phrase(_, kids) => kids.iter_mut().for_each(|k| k.leaves_mut(out)),
        }
    }

    pub fn text(&self) -> String {
        let mut w = Vec::new();
        self.words(&mut w);
        w.join(" ")
    }

    pub fn word_count(&self) -> usize {
        let mut w = Vec::new();
        self.words(&mut w);
        w.len()
    }

    pub fn tree_text(&self) -> String {
        let mut s = String::new();
        self.bracketed(&mut s);
        s
    }

    pub fn tree(&self) -> ConstituencyTree {
        ConstituencyTree::parse_bracketed(&self.tree_text()).expect("generated tree parses")
    }
}

fn word(rng: &mut impl Rng, tag: &'static str, pool: &[&str]) -> Syn {
    Syn::Word(tag, pool.choose(rng).expect("non-empty").to_string())
}

fn np(rng: &mut impl Rng, depth: usize) -> Syn {
    let mut kids = vec![word(rng, "DT", &DETS)];
    if rng.gen_bool(0.4) {
        kids.push(word(rng, "JJ", &ADJS));
    }
    kids.push(word(rng, "NN", &NOUNS));
    let base = Syn::Phrase("NP", kids);
    if depth > 0 && rng.gen_bool(0.3) {
        Syn::Phrase("NP", vec![base, pp(rng, depth - 1)])
    } else {
        base
    }
}

fn pp(rng: &mut impl Rng, depth: usize) -> Syn {
    Syn::Phrase("PP", vec![word(rng, "IN", &PREPS), np(rng, depth)])
}

/// A random sentence from the grammar.
pub fn sentence(rng: &mut impl Rng) -> Syn {
    let subject = np(rng, 1);
    let mut vp = vec![word(rng, "VBD", &VERBS)];
    match rng.gen_range(0..4) {
        0 => {}
        1 => vp.push(np(rng, 1)),
        2 => vp.push(pp(rng, 1)),
        _ => {
            vp.push(np(rng, 0));
            vp.push(pp(rng, 0));
        }
    }
    let mut s = vec![subject, Syn::Phrase("VP", vp)];
    if rng.gen_bool(0.5) {
        s.push(Syn::Word(".", ".".into()));
    }
    Syn::Phrase("ROOT", vec![Syn::Phrase("S", s)])
}

/// The same parse with one noun or adjective replaced by another.
pub fn variant(rng: &mut impl Rng, s: &Syn) -> Syn {
    let mut out = s.clone();
    let mut leaves = Vec::new();
    out.leaves_mut(&mut leaves);
    let mut slots: Vec<_> = leaves
        .into_iter()
        .filter(|(tag, _)| *tag == "NN" || *tag == "JJ")
        .collect();
    let k = rng.gen_range(0..slots.len());
    let (tag, w) = &mut slots[k];
    let pool: &[&str] = if *tag == "NN" { &NOUNS } else { &ADJS };
    let others: Vec<&str> = pool.iter().copied().filter(|x| x != w).collect();
    **w = others.choose(rng).expect("pool has alternatives").to_string();
    out
}

/// A sentence of more than 30 words: a subject, a verb and a chain of
/// prepositional phrases.
pub fn long_sentence(rng: &mut impl Rng) -> Syn {
    let subject = np(rng, 0);
    let fixed = subject.word_count() + 2;
    let mut tail = np(rng, 0);
    while fixed + tail.word_count() <= 30 {
        tail = Syn::Phrase("NP", vec![np(rng, 0), Syn::Phrase("PP", vec![word(rng, "IN", &PREPS), tail])]);
    }
    let vp = Syn::Phrase("VP", vec![word(rng, "VBD", &VERBS), Syn::Phrase("PP", vec![word(rng, "IN", &PREPS), tail])]);
    Syn::Phrase("ROOT", vec![Syn::Phrase("S", vec![subject, vp])])
}

const LABELS: [&str; 5] = ["S", "NP", "VP", "PP", "SBAR"];
const TAGS: [&str; 5] = ["DT", "NN", "VB", "IN", "JJ"];

fn random_node(rng: &mut impl Rng, depth: usize, max_depth: usize, words: &mut usize) -> Syn {
    if depth + 2 >= max_depth || (depth > 0 && rng.gen_bool(0.35)) {
        *words += 1;
        let tag = TAGS.choose(rng).expect("non-empty");
        return Syn::Word(tag, format!("w{words}"));
    }
    let label = LABELS.choose(rng).expect("non-empty");
    let kids = (0..rng.gen_range(1..=3))
        .map(|_| random_node(rng, depth + 1, max_depth, words))
        .collect();
    Syn::Phrase(label, kids)
}

/// A random full tree with at most `max_depth` levels, terminals included.
pub fn random_tree(rng: &mut impl Rng, max_depth: usize) -> ConstituencyTree {
    let mut words = 0;
    random_node(rng, 0, max_depth.max(2), &mut words).tree()
}
