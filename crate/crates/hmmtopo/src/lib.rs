//! Hidden Markov model training and topology learning.
//!
//! The usual left-to-right topology underfits signals whose dynamics are
//! richer than a fixed forward chain, while transition probabilities carry
//! too little dynamic range to compensate during decoding. This crate
//! learns the topology itself instead: train a conventional mixture-model
//! baseline, flatten it into a single-Gaussian lattice of the same total
//! size, prune low transitions over a threshold sweep, and keep whatever
//! decodes the training set best, with optional emission feedback rounds.
//!
//! The pieces are usable on their own:
//!
//! * [`model`] — model types, validation, text serialization in [`textfmt`];
//! * [`train`] — forward-backward, embedded Baum-Welch, mixture splitting;
//! * [`topology`] — flattening, pruning, threshold sweep, full pipeline;
//! * [`decode`] — token-passing Viterbi over word networks;
//! * [`score`] — edit-distance alignment and word error rate;
//! * [`diagnose`] — the transition/emission imbalance measurement;
//! * [`synth`] — seeded synthetic corpora with ground-truth generators.

pub mod config;
pub mod decode;
pub mod diagnose;
pub mod emission;
pub mod error;
pub mod features;
pub mod logprob;
pub mod manifest;
pub mod model;
pub mod parallel;
pub mod score;
pub mod synth;
pub mod textfmt;
pub mod topology;
pub mod train;

pub use error::{Error, Result};
