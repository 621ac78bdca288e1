//! Multilingual reclaimed-slur classification at desk scale.
//!
//! The crate covers the whole methodology around a classifier head:
//!
//! - [`corpus`]: JSONL corpora, label/language frequency tables and the
//!   chi-square test of independence between language and label.
//! - [`augment`]: one-to-many back-translation that triples a corpus while
//!   preserving labels, with an HTTP chat-completions client and a mock.
//! - [`features`]: the `EMBV1` embedding file format and an offline hashed
//!   character n-gram encoder.
//! - [`training`]: the dynamic 1:3 undersampling batch planner, a 2-logit
//!   linear head, weighted cross-entropy / hinge losses, AdamW with a
//!   warmup-then-decay schedule, and the epoch loop.
//! - [`evaluation`]: confusion metrics, ROC-AUC, stratified k-fold splits,
//!   cross-validation and t-intervals.
//! - [`hpo`]: a univariate Tree-structured Parzen Estimator, a median pruner
//!   and the study runner.
//! - [`calibrate`]: per-language decision threshold sweeps.
//! - [`pipeline`]: the four-run composition and report emission used by the
//!   `reclaim` binary.

pub mod augment;
pub mod calibrate;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod hpo;
pub mod pipeline;
pub mod rng;
pub mod special;
pub mod synthetic;
pub mod training;

pub use corpus::{Corpus, Example, Lang, Origin};
pub use error::{Error, ErrorKind, Result};
