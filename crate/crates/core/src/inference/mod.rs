//! Beam search with a leaf-queue cursor per hypothesis, generation at a
//! chosen pruning height, and selection across heights by ROUGE-1.

use std::cmp::Ordering;

use thiserror::Error;

use crate::evaluation::rouge_n;
use crate::model::{CopySource, DecoderState, Lexicon, Model, ModelError, ModelVars, SemanticEncoding, SyntaxEncoding};
use crate::tensor::{Graph, Scalar};
use crate::text::{pretokenize, ExtendedVocab, TextError, EOS, UNK};
use crate::tree::{max_height, ConstituencyTree, PrunedTree};

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error("beam width must be at least 1")]
    BeamWidth,
    #[error("height must be at least 1")]
    Height,
}

/// A partial or finished output sequence.
#[derive(Debug, Clone)]
pub struct Hypothesis {
    /// Extended-vocabulary ids, EOS included once finished.
    pub tokens: Vec<usize>,
    pub log_prob: f64,
    pub state: DecoderState,
    pub finished: bool,
    /// Queue position used at each step, zero-based.
    pub cursor_trace: Vec<usize>,
}

impl Hypothesis {
    /// Log-probability per emitted token.
    pub fn score(&self) -> f64 {
        self.log_prob / self.tokens.len().max(1) as f64
    }
}

fn by_score(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.score().total_cmp(&a.score())
}

/// Encoded inputs shared by all hypotheses of one search.
pub struct SearchInputs<'a> {
    pub sem: &'a SemanticEncoding,
    pub syn: &'a SyntaxEncoding,
    pub copy: &'a CopySource,
}

/// Length-capped beam search. Each expansion runs one decoder step; the
/// gate moves only that hypothesis's cursor. Returns finished hypotheses
/// best first, followed by unfinished ones if the cap was reached.
pub fn beam_search<T: Scalar>(
    model: &Model<T>,
    g: &mut Graph<'_, T>,
    vars: &ModelVars,
    inputs: &SearchInputs<'_>,
    beam: usize,
    max_len: usize,
) -> Result<Vec<Hypothesis>, InferenceError> {
    if beam == 0 {
        return Err(InferenceError::BeamWidth);
    }
    let vocab_size = model.config.vocab_size;
    let start = model.initial_state(g, vars, inputs.sem, inputs.syn)?;
    let mut live = vec![Hypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
        state: start,
        finished: false,
        cursor_trace: Vec::new(),
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();
    for _ in 0..max_len {
        let mut expanded = Vec::new();
        for h in &live {
            let out = model.decode_step(g, vars, inputs.sem, inputs.syn, &h.state, inputs.copy)?;
            let dist: Vec<f64> = g.data(out.dist).iter().map(|p| p.to_f64().unwrap_or(0.0)).collect();
            let p_t = g.scalar(out.p_t).to_f64().unwrap_or(0.0);
            let mut order: Vec<usize> = (0..dist.len()).collect();
            order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
            for &id in order.iter().take(beam) {
                let mut tokens = h.tokens.clone();
                tokens.push(id);
                let mut trace = h.cursor_trace.clone();
                trace.push(h.state.cursor.position);
                expanded.push(Hypothesis {
                    tokens,
                    log_prob: h.log_prob + dist[id].ln(),
                    state: DecoderState {
                        s: out.next_s,
                        cursor: h.state.cursor.advance(p_t),
                        prev: if id < vocab_size { id } else { UNK },
                    },
                    finished: id == EOS,
                    cursor_trace: trace,
                });
            }
        }
        expanded.sort_by(by_score);
        expanded.truncate(beam);
        live.clear();
        for h in expanded {
            if h.finished {
                finished.push(h);
            } else {
                live.push(h);
            }
        }
        if live.is_empty() || finished.len() >= beam {
            break;
        }
    }
    finished.sort_by(by_score);
    live.sort_by(by_score);
    finished.extend(live);
    Ok(finished)
}

/// Greedy decoding: the argmax token at every step.
pub fn greedy_search<T: Scalar>(
    model: &Model<T>,
    g: &mut Graph<'_, T>,
    vars: &ModelVars,
    inputs: &SearchInputs<'_>,
    max_len: usize,
) -> Result<Vec<usize>, InferenceError> {
    let mut state = model.initial_state(g, vars, inputs.sem, inputs.syn)?;
    let mut tokens = Vec::new();
    while tokens.len() < max_len {
        let out = model.decode_step(g, vars, inputs.sem, inputs.syn, &state, inputs.copy)?;
        let id = crate::model::argmax(g.data(out.dist));
        tokens.push(id);
        if id == EOS {
            break;
        }
        let p_t = g.scalar(out.p_t).to_f64().unwrap_or(0.0);
        state = DecoderState {
            s: out.next_s,
            cursor: state.cursor.advance(p_t),
            prev: if id < model.config.vocab_size { id } else { UNK },
        };
    }
    Ok(tokens)
}

/// One generated sentence and the pruning height that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub text: String,
    pub height: usize,
}

/// Decoding front end bound to a trained model and its lexicon.
pub struct Generator<'a, T> {
    pub model: &'a Model<T>,
    pub lexicon: &'a Lexicon,
    pub beam: usize,
    pub max_len: usize,
}

impl<'a, T: Scalar> Generator<'a, T> {
    pub fn new(model: &'a Model<T>, lexicon: &'a Lexicon) -> Self {
        Generator {
            model,
            lexicon,
            beam: 5,
            max_len: crate::model::MAX_LEN,
        }
    }

    /// Ranked hypotheses for `source` under an already pruned exemplar,
    /// with the extended vocabulary needed to read them.
    pub fn decode(&self, source: &str, exemplar: &PrunedTree) -> Result<(Vec<Hypothesis>, Vec<String>), InferenceError> {
        let lex = self.lexicon;
        let symbols = lex.vocab.symbols(&lex.bpe, &pretokenize(source));
        let ext = ExtendedVocab::new(&lex.vocab, &symbols);
        let source_ids: Vec<usize> = symbols.iter().map(|s| lex.vocab.id(s)).collect();
        let copy = CopySource {
            ext_ids: symbols.iter().map(|s| ext.id(s)).collect(),
            ext_len: ext.len(),
        };
        let mut g = Graph::new(&self.model.params);
        let vars = self.model.bind(&mut g);
        let sem = self.model.encode_semantic(&mut g, &vars, &source_ids)?;
        let syn = self.model.encode_syntax(&mut g, &vars, exemplar, &lex.labels)?;
        let inputs = SearchInputs {
            sem: &sem,
            syn: &syn,
            copy: &copy,
        };
        let hyps = beam_search(self.model, &mut g, &vars, &inputs, self.beam, self.max_len)?;
        Ok((hyps, ext.extension().to_vec()))
    }

    /// Surface text of extended ids; EOS and anything after it is dropped.
    pub fn render(&self, tokens: &[usize], extension: &[String]) -> Result<String, InferenceError> {
        let end = tokens.iter().position(|&t| t == EOS).unwrap_or(tokens.len());
        let ext = ExtendedVocab::new(&self.lexicon.vocab, extension);
        Ok(ext.decode(&tokens[..end])?)
    }

    /// Generation under the exemplar pruned at `height`, or at its full
    /// height when `None`.
    pub fn generate_f(
        &self,
        source: &str,
        exemplar: &ConstituencyTree,
        height: Option<usize>,
    ) -> Result<Generation, InferenceError> {
        let h = height.unwrap_or_else(|| max_height(exemplar));
        if h == 0 {
            return Err(InferenceError::Height);
        }
        let pruned = exemplar.strip_terminals().prune(h);
        let (hyps, extension) = self.decode(source, &pruned)?;
        let best = hyps.first().map(|h| h.tokens.as_slice()).unwrap_or(&[]);
        Ok(Generation {
            text: self.render(best, &extension)?,
            height: h,
        })
    }

    /// Candidates at the five largest heights, then the one closest to the
    /// source by ROUGE-1.
    pub fn generate_r(&self, source: &str, exemplar: &ConstituencyTree) -> Result<Generation, InferenceError> {
        let candidates = candidate_heights(max_height(exemplar))
            .into_iter()
            .map(|h| self.generate_f(source, exemplar, Some(h)))
            .collect::<Result<Vec<_>, _>>()?;
        let idx = select_by_rouge(source, &candidates);
        Ok(candidates[idx].clone())
    }
}

/// `H_max, H_max - 1, ..., H_max - 4`, keeping heights of at least 1.
pub fn candidate_heights(h_max: usize) -> Vec<usize> {
    (0..5).filter_map(|k| h_max.checked_sub(k)).filter(|&h| h >= 1).collect()
}

/// Index of the candidate with the highest word-level ROUGE-1 against the
/// source; ties go to the smaller height, then the earlier candidate.
pub fn select_by_rouge(source: &str, candidates: &[Generation]) -> usize {
    let src = pretokenize(source);
    let scored: Vec<f64> = candidates
        .iter()
        .map(|c| rouge_n(&pretokenize(&c.text), &src, 1))
        .collect();
    let mut best = 0;
    for i in 1..candidates.len() {
        let better = scored[i] > scored[best]
            || (scored[i] == scored[best] && candidates[i].height < candidates[best].height);
        if better {
            best = i;
        }
    }
    best
}
