use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::tensor::{ParamId, ParamStore, Scalar, Tensor};

/// Sizes that determine every parameter shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub label_count: usize,
    pub hidden: usize,
    /// Token and label embedding width.
    pub emb: usize,
    /// Stacked bidirectional encoder layers.
    pub layers: usize,
}

impl ModelConfig {
    /// Width of `[c; h^Y; s; e]`.
    pub fn feature_dim(&self) -> usize {
        4 * self.hidden + self.emb
    }

    fn shapes(&self) -> Vec<(String, Vec<usize>)> {
        let (h, e) = (self.hidden, self.emb);
        let mut out = vec![
            ("tok_emb".to_string(), vec![self.vocab_size, e]),
            ("label_emb".to_string(), vec![self.label_count, e]),
        ];
        let mut gru = |prefix: String, input: usize| {
            out.push((format!("{prefix}.w_ih"), vec![3 * h, input]));
            out.push((format!("{prefix}.w_hh"), vec![3 * h, h]));
            out.push((format!("{prefix}.b_ih"), vec![3 * h]));
            out.push((format!("{prefix}.b_hh"), vec![3 * h]));
        };
        for layer in 0..self.layers {
            let input = if layer == 0 { e } else { 2 * h };
            gru(format!("enc.{layer}.fwd"), input);
            gru(format!("enc.{layer}.bwd"), input);
        }
        gru("dec".to_string(), 3 * h + e);
        let f = self.feature_dim();
        out.extend([
            ("syn.w_pa".to_string(), vec![h, h]),
            ("syn.w_v".to_string(), vec![h, e]),
            ("syn.b_v".to_string(), vec![h]),
            ("syn.root".to_string(), vec![h]),
            ("attn.w_h".to_string(), vec![h, 2 * h]),
            ("attn.w_s".to_string(), vec![h, h]),
            ("attn.b".to_string(), vec![h]),
            ("attn.v".to_string(), vec![h]),
            ("gate.w".to_string(), vec![1, f]),
            ("gate.b".to_string(), vec![1]),
            ("out.w".to_string(), vec![self.vocab_size, f]),
            ("out.b".to_string(), vec![self.vocab_size]),
            ("copy.w_c".to_string(), vec![2 * h]),
            ("copy.w_s".to_string(), vec![h]),
            ("copy.w_x".to_string(), vec![e]),
            ("copy.b".to_string(), vec![1]),
            ("init.w".to_string(), vec![h, 2 * h]),
            ("init.b".to_string(), vec![h]),
        ]);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GruIds {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub b_ih: ParamId,
    pub b_hh: ParamId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelIds {
    pub tok_emb: ParamId,
    pub label_emb: ParamId,
    pub encoder: Vec<[GruIds; 2]>,
    pub decoder: GruIds,
    pub syn_w_pa: ParamId,
    pub syn_w_v: ParamId,
    pub syn_b_v: ParamId,
    pub syn_root: ParamId,
    pub attn_w_h: ParamId,
    pub attn_w_s: ParamId,
    pub attn_b: ParamId,
    pub attn_v: ParamId,
    pub gate_w: ParamId,
    pub gate_b: ParamId,
    pub out_w: ParamId,
    pub out_b: ParamId,
    pub copy_w_c: ParamId,
    pub copy_w_s: ParamId,
    pub copy_w_x: ParamId,
    pub copy_b: ParamId,
    pub init_w: ParamId,
    pub init_b: ParamId,
}

pub(super) fn init<T: Scalar>(config: &ModelConfig, rng: &mut impl Rng) -> (ParamStore<T>, ModelIds) {
    let mut store = ParamStore::new();
    for (name, shape) in config.shapes() {
        let n: usize = shape.iter().product();
        let data = if shape.len() == 2 && !name.ends_with("_emb") {
            let bound = 1.0 / (shape[1] as f64).sqrt();
            (0..n).map(|_| T::of(rng.gen_range(-bound..bound))).collect()
        } else if name.ends_with("_emb") || name == "syn.root" || name == "attn.v" || name.starts_with("copy.w") {
            (0..n).map(|_| T::of(rng.gen_range(-0.1..0.1))).collect()
        } else {
            vec![T::zero(); n]
        };
        store.insert(&name, Tensor::new(shape, data).expect("shape matches data"));
    }
    let ids = resolve(config, &store).expect("freshly built store is complete");
    (store, ids)
}

pub(super) fn resolve<T: Scalar>(config: &ModelConfig, store: &ParamStore<T>) -> Result<ModelIds, ModelError> {
    for (name, shape) in config.shapes() {
        match store.by_name(&name) {
            Some(t) if t.shape() == shape.as_slice() => {}
            _ => return Err(ModelError::BadParam(name)),
        }
    }
    let id = |name: &str| store.id(name).expect("checked above");
    let gru = |prefix: &str| GruIds {
        w_ih: id(&format!("{prefix}.w_ih")),
        w_hh: id(&format!("{prefix}.w_hh")),
        b_ih: id(&format!("{prefix}.b_ih")),
        b_hh: id(&format!("{prefix}.b_hh")),
    };
    Ok(ModelIds {
        tok_emb: id("tok_emb"),
        label_emb: id("label_emb"),
        encoder: (0..config.layers)
            .map(|l| [gru(&format!("enc.{l}.fwd")), gru(&format!("enc.{l}.bwd"))])
            .collect(),
        decoder: gru("dec"),
        syn_w_pa: id("syn.w_pa"),
        syn_w_v: id("syn.w_v"),
        syn_b_v: id("syn.b_v"),
        syn_root: id("syn.root"),
        attn_w_h: id("attn.w_h"),
        attn_w_s: id("attn.w_s"),
        attn_b: id("attn.b"),
        attn_v: id("attn.v"),
        gate_w: id("gate.w"),
        gate_b: id("gate.b"),
        out_w: id("out.w"),
        out_b: id("out.b"),
        copy_w_c: id("copy.w_c"),
        copy_w_s: id("copy.w_s"),
        copy_w_x: id("copy.w_x"),
        copy_b: id("copy.b"),
        init_w: id("init.w"),
        init_b: id("init.b"),
    })
}
