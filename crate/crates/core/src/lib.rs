//! Paraphrase generation steered by the constituency parse of an exemplar
//! sentence.
//!
//! A source sentence is encoded by a bidirectional GRU; the exemplar's parse,
//! stripped of its words and pruned to a chosen height, is encoded top-down.
//! The decoder walks the pruned tree's leaves left to right under a learned
//! gate and mixes generation with copying from the source.
//!
//! The numeric core is generic over the scalar type; [`Model64`] and
//! [`Model32`] fix it.

pub mod dataset;
pub mod evaluation;
pub mod inference;
pub mod io;
pub mod model;
pub mod tensor;
pub mod text;
pub mod training;
pub mod tree;

pub use model::{Lexicon, Model, ModelConfig};
pub use tensor::{Scalar, Tensor};
pub use tree::{ConstituencyTree, PrunedTree, SyntaxSkeleton};

pub type Model64 = model::Model<f64>;
pub type Model32 = model::Model<f32>;
pub type Graph64<'p> = tensor::Graph<'p, f64>;
pub type Graph32<'p> = tensor::Graph<'p, f32>;
pub type Tensor64 = tensor::Tensor<f64>;
pub type Tensor32 = tensor::Tensor<f32>;
