//! Topic-grained multi-vector retrieval.
//!
//! Texts are encoded into one embedding per representative topic: an LDA
//! topic model decides which words carry which topics, a small contextual
//! encoder embeds the words, and a per-topic attention pool fuses each
//! topic's words into a single vector. Documents are stored offline in a
//! quantized index and ranked against queries with MaxSim.

mod binio;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod index;
pub mod linalg;
pub mod retrieval;
mod seed;
pub mod synth;
pub mod topic_model;
pub mod trainer;

pub use error::{Error, Result};
