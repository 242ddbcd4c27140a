//! Pool-based active learning for token-level NER with a large language
//! model as the in-loop annotator, plus the tooling used to pick that
//! annotator: agreement, consistency, format-error and contamination
//! analyses.
//!
//! The pieces, bottom-up:
//!
//! - [`corpus`]: BIO sentences, CoNLL and JSONL formats.
//! - [`sampling`]: token entropy, uncertainty selection, entity-balanced
//!   subsampling.
//! - [`annotation`]: few-shot prompts, chat-completion and mock backends,
//!   response parsing.
//! - [`quality`]: Fleiss' kappa, consistency, format-error tallies,
//!   entity-class accuracy.
//! - [`tagger`]: a hashed-feature softmax token classifier.
//! - [`active_learning`]: the select, annotate, retrain loop, checkpoints
//!   and cost accounting.
//! - [`contamination`]: source-identification score and completion probe.
//! - [`synth`]: synthetic corpora for offline experiments.
//!
//! Runnable walkthroughs live in `examples/`.

pub mod active_learning;
pub mod annotation;
pub mod contamination;
pub mod corpus;
pub mod error;
pub mod quality;
pub mod rng;
pub mod sampling;
pub mod synth;
pub mod tagger;

pub use corpus::{Corpus, EntityClass, LabelSet, Sentence, Tag};
pub use error::{Error, Result};
