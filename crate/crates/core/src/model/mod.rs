//! The paraphrase network: a bidirectional GRU sentence encoder, a top-down
//! tree encoder over the pruned exemplar skeleton, additive attention, the
//! phrase-transition gate and a pointer-generator output layer.
//!
//! All forward computations are recorded on a [`Graph`] so the same code
//! serves training (with [`Graph::backward`]) and decoding.

mod labels;
mod params;

pub use labels::{LabelVocab, UNK_TAG};
pub use params::{GruIds, ModelConfig, ModelIds};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::tensor::{Graph, ParamStore, Scalar, Tensor, TensorError, Var};
use crate::text::{BpeModel, Vocab, SOS};
use crate::tree::PrunedTree;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("empty source sentence")]
    EmptySource,
    #[error("source of {len} tokens exceeds the maximum length {max}")]
    SourceTooLong { len: usize, max: usize },
    #[error("parameter '{0}' missing or mis-shaped")]
    BadParam(String),
}

/// Text-side resources a model is tied to.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    pub bpe: BpeModel,
    pub vocab: Vocab,
    pub labels: LabelVocab,
}

/// Network parameters plus the configuration that fixes their shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub params: ParamStore<T>,
    ids: ModelIds,
}

/// Parameter nodes bound into one graph.
#[derive(Debug, Clone)]
pub struct GruVars {
    w_ih: Var,
    w_hh: Var,
    b_ih: Var,
    b_hh: Var,
    hidden: usize,
}

#[derive(Debug, Clone)]
pub struct ModelVars {
    encoder: Vec<[GruVars; 2]>,
    decoder: GruVars,
    syn_w_pa: Var,
    syn_w_v: Var,
    syn_b_v: Var,
    syn_root: Var,
    attn_w_h: Var,
    attn_w_s: Var,
    attn_b: Var,
    attn_v: Var,
    gate_w: Var,
    gate_b: Var,
    out_w: Var,
    out_b: Var,
    copy_w_c: Var,
    copy_w_s: Var,
    copy_w_x: Var,
    copy_b: Var,
    init_w: Var,
    init_b: Var,
}

/// Encoded source sentence.
#[derive(Debug, Clone)]
pub struct SemanticEncoding {
    /// Top-layer forward‖backward state per source token.
    pub states: Vec<Var>,
    /// Final forward state ‖ final backward state.
    pub summary: Var,
    /// `W_h h_i + b_attn`, precomputed once per source.
    keys: Vec<Var>,
}

/// Encoded exemplar tree.
#[derive(Debug, Clone)]
pub struct SyntaxEncoding {
    /// Representation of every pruned-tree node, by node id.
    pub nodes: Vec<Var>,
    /// Leaf representations, left to right.
    pub queue: Vec<Var>,
}

/// Position in the leaf queue. Zero-based; `exhausted` records a pop
/// request at the final element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntaxCursor {
    pub position: usize,
    pub len: usize,
    pub exhausted: bool,
}

impl SyntaxCursor {
    pub fn new(len: usize) -> Self {
        SyntaxCursor {
            position: 0,
            len,
            exhausted: false,
        }
    }

    /// Moves to the next queue element; clamps at the last one.
    pub fn pop(self) -> Self {
        if self.position + 1 < self.len {
            SyntaxCursor {
                position: self.position + 1,
                ..self
            }
        } else {
            SyntaxCursor {
                exhausted: true,
                ..self
            }
        }
    }

    /// Pops when the transition probability reaches one half.
    pub fn advance(self, p_t: f64) -> Self {
        if p_t < 0.5 {
            self
        } else {
            self.pop()
        }
    }
}

#[derive(Debug, Clone)]
pub struct DecoderState {
    pub s: Var,
    pub cursor: SyntaxCursor,
    /// Base-vocabulary id fed as the next input token.
    pub prev: usize,
}

/// Everything one decoder step produces.
#[derive(Debug, Clone)]
pub struct StepOutput {
    /// Distribution over the extended vocabulary.
    pub dist: Var,
    pub p_vocab: Var,
    pub p_gen: Var,
    pub alpha: Var,
    pub context: Var,
    /// Probability of moving to the next leaf for the following token.
    pub p_t: Var,
    /// Recurrent state for the next step.
    pub next_s: Var,
}

/// Extended-vocabulary ids of the source tokens, for copying.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CopySource {
    pub ext_ids: Vec<usize>,
    pub ext_len: usize,
}

/// Default upper bound on sequence lengths.
pub const MAX_LEN: usize = 60;

impl<T: Scalar> Model<T> {
    /// Fresh model with uniform(-1/√fan_in, 1/√fan_in) weights and zero
    /// biases.
    pub fn new(config: ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (params, ids) = params::init(&config, &mut rng);
        Model {
            config,
            params,
            ids,
        }
    }

    /// Wraps loaded parameters, checking every expected array is present
    /// with the right shape.
    pub fn from_params(config: ModelConfig, params: ParamStore<T>) -> Result<Self, ModelError> {
        let ids = params::resolve(&config, &params)?;
        Ok(Model {
            config,
            params,
            ids,
        })
    }

    pub fn ids(&self) -> &ModelIds {
        &self.ids
    }

    /// Creates the parameter nodes of this model on `g`.
    pub fn bind(&self, g: &mut Graph<'_, T>) -> ModelVars {
        let ids = &self.ids;
        let h = self.config.hidden;
        let gru = |g: &mut Graph<'_, T>, k: &GruIds| GruVars {
            w_ih: g.param(k.w_ih),
            w_hh: g.param(k.w_hh),
            b_ih: g.param(k.b_ih),
            b_hh: g.param(k.b_hh),
            hidden: h,
        };
        let encoder = ids
            .encoder
            .iter()
            .map(|[f, b]| [gru(g, f), gru(g, b)])
            .collect();
        let decoder = gru(g, &ids.decoder);
        ModelVars {
            encoder,
            decoder,
            syn_w_pa: g.param(ids.syn_w_pa),
            syn_w_v: g.param(ids.syn_w_v),
            syn_b_v: g.param(ids.syn_b_v),
            syn_root: g.param(ids.syn_root),
            attn_w_h: g.param(ids.attn_w_h),
            attn_w_s: g.param(ids.attn_w_s),
            attn_b: g.param(ids.attn_b),
            attn_v: g.param(ids.attn_v),
            gate_w: g.param(ids.gate_w),
            gate_b: g.param(ids.gate_b),
            out_w: g.param(ids.out_w),
            out_b: g.param(ids.out_b),
            copy_w_c: g.param(ids.copy_w_c),
            copy_w_s: g.param(ids.copy_w_s),
            copy_w_x: g.param(ids.copy_w_x),
            copy_b: g.param(ids.copy_b),
            init_w: g.param(ids.init_w),
            init_b: g.param(ids.init_b),
        }
    }

    pub fn token_embedding(&self, g: &mut Graph<'_, T>, id: usize) -> Result<Var, ModelError> {
        Ok(g.lookup(self.ids.tok_emb, id)?)
    }

    /// Runs the stacked bidirectional GRU over base-vocabulary ids.
    pub fn encode_semantic(
        &self,
        g: &mut Graph<'_, T>,
        vars: &ModelVars,
        source: &[usize],
    ) -> Result<SemanticEncoding, ModelError> {
        if source.is_empty() {
            return Err(ModelError::EmptySource);
        }
        if source.len() > MAX_LEN {
            return Err(ModelError::SourceTooLong {
                len: source.len(),
                max: MAX_LEN,
            });
        }
        let h = self.config.hidden;
        let mut inputs = source
            .iter()
            .map(|&id| self.token_embedding(g, id))
            .collect::<Result<Vec<_>, _>>()?;
        let zero = g.constant(Tensor::zeros(&[h]));
        let mut summary = None;
        for [fwd, bwd] in &vars.encoder {
            let mut forward = Vec::with_capacity(inputs.len());
            let mut state = zero;
            for &x in &inputs {
                state = gru_step(g, fwd, x, state)?;
                forward.push(state);
            }
            let mut backward = vec![zero; inputs.len()];
            let mut state = zero;
            for (i, &x) in inputs.iter().enumerate().rev() {
                state = gru_step(g, bwd, x, state)?;
                backward[i] = state;
            }
            inputs = forward
                .iter()
                .zip(&backward)
                .map(|(&f, &b)| g.concat(&[f, b]))
                .collect::<Result<Vec<_>, _>>()?;
            summary = Some(g.concat(&[*forward.last().expect("non-empty"), backward[0]])?);
        }
        let keys = inputs
            .iter()
            .map(|&hx| {
                let proj = g.matvec(vars.attn_w_h, hx)?;
                g.add(proj, vars.attn_b)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SemanticEncoding {
            states: inputs,
            summary: summary.expect("at least one encoder layer"),
            keys,
        })
    }

    /// Top-down node representations `GeLU(W_pa h_parent + W_v e(label) + b_v)`;
    /// the root's parent is a learned vector.
    pub fn encode_syntax(
        &self,
        g: &mut Graph<'_, T>,
        vars: &ModelVars,
        pruned: &PrunedTree,
        labels: &LabelVocab,
    ) -> Result<SyntaxEncoding, ModelError> {
        let tree = pruned.tree();
        let mut reps: Vec<Option<Var>> = vec![None; tree.len()];
        let mut parent_of = vec![None; tree.len()];
        for id in 0..tree.len() {
            for &c in &tree.node(id).children {
                parent_of[c] = Some(id);
            }
        }
        // Preorder ids: every parent is computed before its children.
        for id in 0..tree.len() {
            let parent = match parent_of[id] {
                Some(p) => reps[p].expect("parent precedes child"),
                None => vars.syn_root,
            };
            let label = g.lookup(self.ids.label_emb, labels.id(tree.label(id)))?;
            let a = g.matvec(vars.syn_w_pa, parent)?;
            let b = g.matvec(vars.syn_w_v, label)?;
            let pre = g.add_n(&[a, b, vars.syn_b_v])?;
            reps[id] = Some(g.gelu(pre));
        }
        let nodes: Vec<Var> = reps.into_iter().map(|r| r.expect("all nodes visited")).collect();
        let queue = pruned.leaf_queue().0.iter().map(|&id| nodes[id]).collect();
        Ok(SyntaxEncoding { nodes, queue })
    }

    /// `s_0 = tanh(W_init [fwd_final; bwd_final] + b_init)`, cursor on the
    /// first leaf, SOS as the first input.
    pub fn initial_state(
        &self,
        g: &mut Graph<'_, T>,
        vars: &ModelVars,
        sem: &SemanticEncoding,
        syn: &SyntaxEncoding,
    ) -> Result<DecoderState, ModelError> {
        let proj = g.matvec(vars.init_w, sem.summary)?;
        let pre = g.add(proj, vars.init_b)?;
        Ok(DecoderState {
            s: g.tanh(pre),
            cursor: SyntaxCursor::new(syn.queue.len()),
            prev: SOS,
        })
    }

    /// Additive attention: `e_i = v·tanh(W_h h_i + W_s s + b)`,
    /// `α = softmax(e)`, `c = Σ α_i h_i`.
    pub fn attend(
        &self,
        g: &mut Graph<'_, T>,
        vars: &ModelVars,
        sem: &SemanticEncoding,
        s: Var,
    ) -> Result<(Var, Var), ModelError> {
        let query = g.matvec(vars.attn_w_s, s)?;
        let scores = sem
            .keys
            .iter()
            .map(|&k| {
                let pre = g.add(k, query)?;
                let act = g.tanh(pre);
                g.dot(vars.attn_v, act)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let e = g.concat(&scores)?;
        let alpha = g.softmax(e)?;
        let context = g.weighted_sum(alpha, &sem.states)?;
        Ok((alpha, context))
    }

    /// `p_t = σ(W_bop [c; h^Y; s; e(z')] + b_bop)`.
    pub fn gate(
        &self,
        g: &mut Graph<'_, T>,
        vars: &ModelVars,
        features: Var,
    ) -> Result<Var, ModelError> {
        let z = g.matvec(vars.gate_w, features)?;
        let z = g.add(z, vars.gate_b)?;
        Ok(g.sigmoid(z))
    }

    /// One decoder step from `state` with the syntactic signal of the
    /// cursor's leaf.
    pub fn decode_step(
        &self,
        g: &mut Graph<'_, T>,
        vars: &ModelVars,
        sem: &SemanticEncoding,
        syn: &SyntaxEncoding,
        state: &DecoderState,
        copy: &CopySource,
    ) -> Result<StepOutput, ModelError> {
        let s = state.s;
        let hy = syn.queue[state.cursor.position];
        let emb = self.token_embedding(g, state.prev)?;
        let (alpha, context) = self.attend(g, vars, sem, s)?;

        let features = g.concat(&[context, hy, s, emb])?;
        let logits = g.matvec(vars.out_w, features)?;
        let logits = g.add(logits, vars.out_b)?;
        let p_vocab = g.softmax(logits)?;

        let gc = g.dot(vars.copy_w_c, context)?;
        let gs = g.dot(vars.copy_w_s, s)?;
        let gx = g.dot(vars.copy_w_x, emb)?;
        let pre = g.add_n(&[gc, gs, gx, vars.copy_b])?;
        let p_gen = g.sigmoid(pre);

        let generated = g.scale_by(p_vocab, p_gen)?;
        let copy_weight = g.one_minus(p_gen);
        let copied = g.scale_by(alpha, copy_weight)?;
        let dist = g.scatter_add(generated, copied, &copy.ext_ids, copy.ext_len)?;

        let p_t = self.gate(g, vars, features)?;

        let rnn_in = g.concat(&[context, hy, emb])?;
        let next_s = gru_step(g, &vars.decoder, rnn_in, s)?;
        Ok(StepOutput {
            dist,
            p_vocab,
            p_gen,
            alpha,
            context,
            p_t,
            next_s,
        })
    }
}

/// One GRU step; gate order in the stacked weights is reset, update, new.
pub fn gru_step<T: Scalar>(g: &mut Graph<'_, T>, gru: &GruVars, x: Var, h: Var) -> Result<Var, TensorError> {
    let n = gru.hidden;
    let gi = g.matvec(gru.w_ih, x)?;
    let gi = g.add(gi, gru.b_ih)?;
    let gh = g.matvec(gru.w_hh, h)?;
    let gh = g.add(gh, gru.b_hh)?;
    let (ir, iz, inn) = (g.slice(gi, 0, n)?, g.slice(gi, n, n)?, g.slice(gi, 2 * n, n)?);
    let (hr, hz, hn) = (g.slice(gh, 0, n)?, g.slice(gh, n, n)?, g.slice(gh, 2 * n, n)?);
    let r = g.add(ir, hr)?;
    let r = g.sigmoid(r);
    let z = g.add(iz, hz)?;
    let z = g.sigmoid(z);
    let rn = g.mul(r, hn)?;
    let cand = g.add(inn, rn)?;
    let cand = g.tanh(cand);
    let diff = g.sub(h, cand)?;
    let keep = g.mul(z, diff)?;
    g.add(cand, keep)
}

/// Index of the largest element; the first one wins ties.
pub fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
