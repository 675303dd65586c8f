//! Joint token and gate objective, Adam, and the epoch loop with per-example
//! random pruning heights.

mod adam;
mod example;
mod loss;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use example::{make_training_example, AlignedExample, PairRecord, SkipReason};
pub use loss::{batch_gradients, batch_loss, evaluate_loss, example_loss, ExampleLoss, LossParts, PROB_FLOOR};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{LabelVocab, Lexicon, Model, ModelConfig, ModelError};
use crate::tensor::{ParamStore, Scalar, TensorError};
use crate::text::{pretokenize, BpeModel, TextError, Vocab};
use crate::tree::max_height;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error("empty batch")]
    EmptyBatch,
    #[error("non-finite loss or gradient")]
    NonFinite,
    #[error("no usable training examples")]
    NoExamples,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("training observer failed: {0}")]
    Observer(#[from] std::io::Error),
}

impl From<TensorError> for TrainError {
    fn from(e: TensorError) -> Self {
        match e {
            TensorError::NonFinite(_) => TrainError::NonFinite,
            other => TrainError::Model(ModelError::Tensor(other)),
        }
    }
}

fn default_lr() -> f64 {
    7e-5
}
fn default_tf_ratio() -> f64 {
    0.9
}
fn default_max_len() -> usize {
    60
}
fn default_batch() -> usize {
    32
}
fn default_epochs() -> usize {
    10
}
fn default_hidden() -> usize {
    128
}
fn default_emb() -> usize {
    300
}
fn default_layers() -> usize {
    3
}
fn default_vocab_cap() -> usize {
    24_000
}
fn default_merges() -> usize {
    10_000
}
fn default_min_height() -> usize {
    3
}
fn default_beam() -> usize {
    5
}
fn default_checkpoint_every() -> usize {
    1
}

/// Flat key-value training configuration. Unset keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_tf_ratio")]
    pub tf_ratio: f64,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_emb")]
    pub emb: usize,
    #[serde(default = "default_layers")]
    pub layers: usize,
    #[serde(default = "default_vocab_cap")]
    pub vocab_cap: usize,
    #[serde(default = "default_merges")]
    pub merges: usize,
    /// Lower end of the sampled pruning heights.
    #[serde(default = "default_min_height")]
    pub min_height: usize,
    /// Stop after this many optimizer steps; 0 means no limit.
    #[serde(default)]
    pub max_steps: usize,
    /// Fraction of pairs held out for validation, taken from the end.
    #[serde(default)]
    pub validation: f64,
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: usize,
    #[serde(default = "default_beam")]
    pub beam: usize,
    /// "f64" or "f32".
    #[serde(default = "default_precision")]
    pub precision: String,
    /// Test and validation triples drawn by the dataset builder.
    #[serde(default = "default_split_size")]
    pub test_n: usize,
    #[serde(default = "default_split_size")]
    pub val_n: usize,
}

fn default_split_size() -> usize {
    3000
}

fn default_precision() -> String {
    "f64".to_string()
}

impl Default for TrainConfig {
    fn default() -> Self {
        toml::from_str("").expect("all keys have defaults")
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self, TrainError> {
        let config: TrainConfig = toml::from_str(text).map_err(|e| TrainError::Config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.tf_ratio) {
            return bad("tf_ratio must lie in [0, 1]");
        }
        if !(self.lr > 0.0) {
            return bad("lr must be positive");
        }
        if self.batch == 0 || self.hidden == 0 || self.emb == 0 || self.layers == 0 || self.beam == 0 {
            return bad("batch, hidden, emb, layers and beam must be positive");
        }
        if self.max_len == 0 || self.max_len > crate::model::MAX_LEN {
            return bad("max_len must lie in 1..=60");
        }
        if !(0.0..1.0).contains(&self.validation) {
            return bad("validation must lie in [0, 1)");
        }
        if self.precision != "f64" && self.precision != "f32" {
            return bad("precision must be f64 or f32");
        }
        Ok(())
    }

    pub fn model_config(&self, lexicon: &Lexicon) -> ModelConfig {
        ModelConfig {
            vocab_size: lexicon.vocab.len(),
            label_count: lexicon.labels.len(),
            hidden: self.hidden,
            emb: self.emb,
            layers: self.layers,
        }
    }

    /// Splits off the validation tail.
    pub fn split<'a>(&self, pairs: &'a [PairRecord]) -> (&'a [PairRecord], &'a [PairRecord]) {
        let held = (pairs.len() as f64 * self.validation).ceil() as usize;
        let held = held.min(pairs.len().saturating_sub(1));
        pairs.split_at(pairs.len() - held)
    }
}

/// Learns BPE on source and target words, then the capped vocabulary and
/// the label inventory of the target trees.
pub fn build_lexicon(pairs: &[PairRecord], merges: usize, vocab_cap: usize) -> Result<Lexicon, TrainError> {
    let corpus: Vec<Vec<String>> = pairs
        .iter()
        .flat_map(|p| [pretokenize(&p.source), pretokenize(&p.target)])
        .collect();
    let bpe = BpeModel::train(&corpus, merges)?;
    let segmented: Vec<Vec<String>> = corpus.iter().map(|words| bpe.segment(words)).collect();
    let vocab = Vocab::build(&bpe, &segmented, vocab_cap);
    let labels = LabelVocab::build(pairs.iter().map(|p| &p.tree));
    Ok(Lexicon { bpe, vocab, labels })
}

/// Pruning height for one example in one epoch: uniform over
/// `min_height..=H_max`, or the full height for shallower trees.
pub fn sample_height(h_max: usize, min_height: usize, rng: &mut impl Rng) -> usize {
    if h_max < min_height {
        h_max
    } else {
        rng.gen_range(min_height..=h_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLog {
    pub step: usize,
    pub parts: LossParts,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochSummary {
    pub epoch: usize,
    pub steps: usize,
    /// Mean of the epoch's step losses.
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

pub enum TrainEvent<'a, T> {
    Step(StepLog),
    Epoch(EpochSummary, &'a Model<T>),
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub history: Vec<EpochSummary>,
    pub steps: usize,
    /// Epoch and parameters with the lowest validation loss, or the lowest
    /// training loss when there is no validation data.
    pub best_epoch: usize,
    pub best_params: ParamStore<T>,
    pub skipped: Vec<(usize, SkipReason)>,
}

/// Every aligned example at its full height, skipping unusable pairs.
pub fn full_height_examples(
    pairs: &[PairRecord],
    lexicon: &Lexicon,
    max_len: usize,
) -> (Vec<AlignedExample>, Vec<(usize, SkipReason)>) {
    let mut out = Vec::new();
    let mut skipped = Vec::new();
    for (i, p) in pairs.iter().enumerate() {
        match make_training_example(p, &lexicon.bpe, &lexicon.vocab, max_height(&p.tree), max_len) {
            Ok(ex) => out.push(ex),
            Err(r) => skipped.push((i, r)),
        }
    }
    (out, skipped)
}

/// Runs the epoch loop. Each epoch draws a fresh height per example,
/// shuffles, and takes one Adam step per batch.
pub fn train<T: Scalar, R: Rng>(
    model: &mut Model<T>,
    lexicon: &Lexicon,
    config: &TrainConfig,
    train_pairs: &[PairRecord],
    val_pairs: &[PairRecord],
    rng: &mut R,
    mut observer: impl FnMut(TrainEvent<'_, T>) -> std::io::Result<()>,
) -> Result<TrainOutcome<T>, TrainError> {
    config.validate()?;
    let (val_examples, _) = full_height_examples(val_pairs, lexicon, config.max_len);
    let heights: Vec<usize> = train_pairs.iter().map(|p| max_height(&p.tree)).collect();

    let mut adam = AdamState::new(&model.params);
    let mut outcome = TrainOutcome {
        history: Vec::new(),
        steps: 0,
        best_epoch: 0,
        best_params: model.params.clone(),
        skipped: Vec::new(),
    };
    let mut best = f64::INFINITY;
    for epoch in 1..=config.epochs {
        let mut examples = Vec::with_capacity(train_pairs.len());
        for (i, (pair, &h_max)) in train_pairs.iter().zip(&heights).enumerate() {
            let h = sample_height(h_max, config.min_height, rng);
            match make_training_example(pair, &lexicon.bpe, &lexicon.vocab, h, config.max_len) {
                Ok(ex) => examples.push(ex),
                Err(reason) if epoch == 1 => {
                    log::warn!("skipping pair {}: {reason}", i + 1);
                    outcome.skipped.push((i, reason));
                }
                Err(_) => {}
            }
        }
        if examples.is_empty() {
            return Err(TrainError::NoExamples);
        }
        examples.shuffle(rng);

        let mut total = 0.0;
        let mut steps = 0;
        for batch in examples.chunks(config.batch) {
            if config.max_steps > 0 && outcome.steps >= config.max_steps {
                break;
            }
            let (parts, grads) = batch_gradients(model, &lexicon.labels, batch, config.tf_ratio, rng)?;
            adam_step(&mut model.params, &grads, &mut adam, config.lr);
            outcome.steps += 1;
            steps += 1;
            total += parts.total;
            observer(TrainEvent::Step(StepLog {
                step: outcome.steps,
                parts,
            }))?;
        }
        if steps == 0 {
            break;
        }

        let val_loss = if val_examples.is_empty() {
            None
        } else {
            Some(evaluate_loss(model, &lexicon.labels, &val_examples, 1.0, rng)?.total)
        };
        let summary = EpochSummary {
            epoch,
            steps,
            train_loss: total / steps as f64,
            val_loss,
        };
        let score = val_loss.unwrap_or(summary.train_loss);
        if score < best {
            best = score;
            outcome.best_epoch = epoch;
            outcome.best_params = model.params.clone();
        }
        outcome.history.push(summary);
        observer(TrainEvent::Epoch(summary, model))?;
    }
    Ok(outcome)
}
