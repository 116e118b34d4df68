//! Learning-to-hash with progressive neuron merging.
//!
//! A small feedforward encoder is trained with a pairwise hashing loss; a
//! neurons merging layer then learns which output bits are redundant and
//! merges them, shrinking a long code to a compact one over several rounds.
//!
//! - [`numcore`]: matrices, the encoder, SGD
//! - [`hashloss`]: discrete and relaxed pairwise losses
//! - [`nmlayer`]: merge graph, active/frozen phases, majority voting
//! - [`metrics`]: Hamming ranking, MAP, PR and precision curves
//! - [`data`]: synthetic and CSV datasets, splits, similarity
//! - [`trainer`]: baseline, progressive and ablation training, checkpoints

pub mod data;
pub mod error;
pub mod hashloss;
pub mod metrics;
pub mod nmlayer;
pub mod numcore;
pub mod trainer;

pub use error::{Error, Result};
