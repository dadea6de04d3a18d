//! Multilingual personalized hashtag recommendation.
//!
//! A tweet is embedded token-by-token, refined by language- and user-guided
//! attention, connected to other tweets of the same language family and to
//! its author in a heterogeneous graph, encoded by a GraphSAGE autoencoder,
//! and scored against the hashtag vocabulary by a softmax ranking head. The
//! crate also carries the training harness (tape-based reverse-mode
//! autodiff, deterministic initialization, checkpoints), ranking metrics,
//! the ablation runner, and a synthetic corpus generator.

pub mod attention;
pub mod autodiff;
pub mod checkpoint;
pub mod config;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod gae;
pub mod gradcheck;
pub mod graph;
pub mod head;
pub mod langid;
pub mod model;
pub mod params;
pub mod rng;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
