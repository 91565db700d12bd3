//! Data preparation and evaluation for terminology-constrained machine
//! translation.
//!
//! The crate covers the full path from a raw parallel corpus to training
//! data carrying target-side constraints, and back from system outputs to
//! terminology-aware scores:
//!
//! * [`model`]: tokens, sentence pairs, constraints and corpus readers
//! * [`lemma`]: word-by-word lemmatization (identity or dictionary)
//! * [`termbase`]: term-base loading and source-side term spotting
//! * [`sampler`]: synthetic constraints sampled from target sentences
//! * [`annotate`]: suffix, factored and replacement annotation schemes
//! * [`metrics`]: exact match, window overlap, weighted TER and BLEU
//! * [`combine`]: rank-based selection among several systems' outputs
//! * [`pipeline`]: cleaning, deduplication and the sharded corpus driver

pub mod annotate;
pub mod combine;
pub mod error;
pub mod lemma;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod sampler;
pub mod termbase;

pub use error::{Error, Result};
