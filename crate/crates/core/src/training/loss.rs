use rand::Rng;

use super::{AlignedExample, TrainError};
use crate::model::{argmax, LabelVocab, Model, ModelVars};
use crate::tensor::{Gradients, Graph, Scalar, Var};
use crate::text::UNK;

/// Probabilities are clamped to `[PROB_FLOOR, 1 - PROB_FLOOR]` before logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// Mean per-token components of the joint objective.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub total: f64,
    pub token_nll: f64,
    pub gate_bce: f64,
}

#[derive(Debug, Clone)]
pub struct ExampleLoss {
    pub loss: Var,
    pub parts: LossParts,
    /// `(p_t, target bit)` per decoder step.
    pub gate_trace: Vec<(f64, u8)>,
    /// Queue elements consumed, counting the initial one.
    pub pops: usize,
}

fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Joint token and gate loss for one example, recorded on `g`.
///
/// The queue always follows the gold bits. The gate at step `t` is trained
/// to predict whether step `t + 1` moves to the next leaf; after the final
/// step the target is 0. Token inputs use the gold token with probability
/// `tf_ratio`, else the model's argmax; copied ids are fed as UNK.
pub fn example_loss<T: Scalar>(
    model: &Model<T>,
    g: &mut Graph<'_, T>,
    vars: &ModelVars,
    labels: &LabelVocab,
    ex: &AlignedExample,
    tf_ratio: f64,
    rng: &mut impl Rng,
) -> Result<ExampleLoss, TrainError> {
    let vocab_size = model.config.vocab_size;
    let input_id = |id: usize| if id < vocab_size { id } else { UNK };
    let lo = T::of(PROB_FLOOR);
    let hi = T::of(1.0 - PROB_FLOOR);

    let sem = model.encode_semantic(g, vars, &ex.source_ids)?;
    let syn = model.encode_syntax(g, vars, &ex.exemplar, labels)?;
    let mut state = model.initial_state(g, vars, &sem, &syn)?;

    let steps = ex.target_ids.len();
    let mut terms = Vec::with_capacity(steps);
    let mut gate_trace = Vec::with_capacity(steps);
    let (mut nll, mut bce) = (0.0, 0.0);
    let mut pops = 1;
    for t in 0..steps {
        let out = model.decode_step(g, vars, &sem, &syn, &state, &ex.copy)?;
        let gold = ex.target_ids[t];
        let p = g.pick(out.dist, gold)?;
        let log_p = g.log_clamped(p, lo, hi);

        let bit = ex.bits.get(t + 1).copied().unwrap_or(0);
        let gate_log = if bit == 1 {
            g.log_clamped(out.p_t, lo, hi)
        } else {
            let q = g.one_minus(out.p_t);
            g.log_clamped(q, lo, hi)
        };
        nll -= to_f64(g.scalar(log_p));
        bce -= to_f64(g.scalar(gate_log));
        gate_trace.push((to_f64(g.scalar(out.p_t)), bit));
        terms.push(log_p);
        terms.push(gate_log);

        if bit == 1 {
            state.cursor = state.cursor.pop();
            pops += 1;
        }
        let use_gold = tf_ratio >= 1.0 || (tf_ratio > 0.0 && rng.gen::<f64>() < tf_ratio);
        let next = if use_gold { gold } else { argmax(g.data(out.dist)) };
        state.prev = input_id(next);
        state.s = out.next_s;
    }
    let sum = g.add_n(&terms)?;
    let loss = g.scale(sum, T::of(-1.0 / steps as f64));
    let n = steps as f64;
    Ok(ExampleLoss {
        loss,
        parts: LossParts {
            total: (nll + bce) / n,
            token_nll: nll / n,
            gate_bce: bce / n,
        },
        gate_trace,
        pops,
    })
}

/// Batch-mean loss recorded on a single graph.
pub fn batch_loss<T: Scalar>(
    model: &Model<T>,
    g: &mut Graph<'_, T>,
    labels: &LabelVocab,
    batch: &[AlignedExample],
    tf_ratio: f64,
    rng: &mut impl Rng,
) -> Result<(Var, LossParts), TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let vars = model.bind(g);
    let mut losses = Vec::with_capacity(batch.len());
    let mut parts = LossParts::default();
    for ex in batch {
        let l = example_loss(model, g, &vars, labels, ex, tf_ratio, rng)?;
        losses.push(l.loss);
        parts = add_parts(parts, l.parts);
    }
    let sum = g.add_n(&losses)?;
    let mean = g.scale(sum, T::of(1.0 / batch.len() as f64));
    Ok((mean, scale_parts(parts, batch.len())))
}

/// Batch-mean loss and its gradient, one graph per example.
pub fn batch_gradients<T: Scalar>(
    model: &Model<T>,
    labels: &LabelVocab,
    batch: &[AlignedExample],
    tf_ratio: f64,
    rng: &mut impl Rng,
) -> Result<(LossParts, Gradients<T>), TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let mut grads = Gradients::new(model.params.len());
    let mut parts = LossParts::default();
    for ex in batch {
        let mut g = Graph::new(&model.params);
        let vars = model.bind(&mut g);
        let l = example_loss(model, &mut g, &vars, labels, ex, tf_ratio, rng)?;
        grads.accumulate(&g.backward(l.loss)?);
        parts = add_parts(parts, l.parts);
    }
    grads.scale(T::of(1.0 / batch.len() as f64));
    let parts = scale_parts(parts, batch.len());
    if !parts.total.is_finite() || !grads.is_finite() {
        return Err(TrainError::NonFinite);
    }
    Ok((parts, grads))
}

/// Mean loss over `examples` without gradients.
pub fn evaluate_loss<T: Scalar>(
    model: &Model<T>,
    labels: &LabelVocab,
    examples: &[AlignedExample],
    tf_ratio: f64,
    rng: &mut impl Rng,
) -> Result<LossParts, TrainError> {
    if examples.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let mut parts = LossParts::default();
    for ex in examples {
        let mut g = Graph::new(&model.params);
        let vars = model.bind(&mut g);
        let l = example_loss(model, &mut g, &vars, labels, ex, tf_ratio, rng)?;
        parts = add_parts(parts, l.parts);
    }
    Ok(scale_parts(parts, examples.len()))
}

fn add_parts(a: LossParts, b: LossParts) -> LossParts {
    LossParts {
        total: a.total + b.total,
        token_nll: a.token_nll + b.token_nll,
        gate_bce: a.gate_bce + b.gate_bce,
    }
}

fn scale_parts(a: LossParts, n: usize) -> LossParts {
    let k = 1.0 / n as f64;
    LossParts {
        total: a.total * k,
        token_nll: a.token_nll * k,
        gate_bce: a.gate_bce * k,
    }
}
