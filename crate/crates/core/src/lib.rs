//! Prosody-aware language modelling and age-of-acquisition prediction for
//! child-directed speech.
//!
//! The pipeline runs from word-aligned corpora with per-token 88-dimensional
//! eGeMAPS vectors ([`corpus`]), through k-means vector quantization of those
//! vectors ([`quantizer`]), factored n-gram language models over word and
//! prosody-class streams ([`flm`]), to ridge regression with cross-validation
//! predicting the age at which words are acquired ([`regress`]). [`pcaviz`]
//! projects type-level feature vectors to two dimensions, and [`synth`]
//! generates seeded synthetic corpora for desk-scale runs.

pub mod corpus;
pub mod error;
pub mod features;
pub mod flm;
pub mod pcaviz;
pub mod pipeline;
pub mod quantizer;
pub mod regress;
pub mod seed;
pub mod synth;

pub use error::{Error, ErrorKind, Result};

/// Length of an eGeMAPS functional feature vector.
pub const PROSODY_DIM: usize = 88;
