//! Statistical toolkit for validating retro-holdout datasets against a public
//! benchmark and for measuring per-model benchmark inflation.
//!
//! The crate is organised by concern:
//!
//! - [`dataset`]: entries, ingestion, filtering, canonical text, sampling.
//! - [`embedding`]: providers, the on-disk cache, cosine similarity.
//! - [`stats`]: exact binomial, two-proportion, Fisher's exact and permutation tests.
//! - [`eval`]: the multiple-choice evaluation protocol against chat providers.
//! - [`suite`]: the four indistinguishability tests and the overall verdict.
//! - [`inflation`]: per-model inflation rows and their renderings.
//! - [`iterate`]: n-gram, similarity and projection reports for dataset iteration.

pub mod dataset;
pub mod embedding;
pub mod eval;
pub mod http;
pub mod inflation;
pub mod iterate;
pub mod manifest;
pub mod rng;
pub mod stats;
pub mod suite;
pub mod svg;
pub mod synth;

pub use dataset::{Dataset, DatasetPair, Entry, QuestionType, Role};
pub use embedding::{EmbeddingMap, EmbeddingVector};
pub use stats::{Sidedness, TestResult};
