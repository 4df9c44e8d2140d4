//! # chronotag
//!
//! Temporal information extraction for clinical notes.
//!
//! Two families of models live here:
//!
//! * [`rnn`]: Elman recurrent taggers (character-level tokenizer, POS
//!   tagger, TIMEX3/EVENT span taggers) trained with full backpropagation
//!   through time, one sentence per gradient step.
//! * [`factorgraph`]: log-linear factor graphs over label variables:
//!   logistic regression, linear-chain CRF with exact inference, and
//!   skip-chain CRF with Gibbs sampling.
//!
//! On top of these, [`temporal`] canonicalizes date expressions and learns
//! phrase associations for distant supervision, and [`docreltime`] predicts
//! each event's relation to the document creation time. [`eval`] scores
//! spans and labels, and [`corpus::synth`] generates annotated corpora with
//! planted regularities for experiments.
//!
//! The `examples/` directory has one runnable program per capability.

pub mod cli;
pub mod corpus;
pub mod docreltime;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod factorgraph;
pub mod features;
pub mod rnn;
pub mod temporal;
pub mod util;

pub use error::{Error, Result};
