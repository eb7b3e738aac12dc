//! Pluggable model providers.
//!
//! The pipeline talks to three kinds of model: an object detector, a
//! text/image embedder and a language model. Each is a trait here; the
//! concrete backends are either in-process fixtures ([`fixture`],
//! [`crate::speaker::ToyLm`]) or an external process speaking the
//! newline-delimited JSON protocol in [`protocol`] over its stdio
//! ([`stream::StreamProvider`]).

pub mod fixture;
pub mod protocol;
pub mod stream;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::landmarks::{BBox, Detection};

pub use fixture::{FixtureDetector, FixtureEmbedder, MockProvider};
pub use stream::StreamProvider;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectQuery<'a> {
    pub scan: &'a str,
    pub viewpoint: &'a str,
    pub categories: &'a [String],
    pub pano_width: u32,
    pub pano_height: u32,
}

pub trait Detector: Send + Sync {
    fn name(&self) -> &str;
    fn detect(&self, query: &DetectQuery<'_>) -> Result<Vec<Detection>>;
}

pub trait Embedder: Send + Sync {
    fn name(&self) -> &str;
    fn embed_text(&self, text: &str) -> Result<Vec<f64>>;
    fn embed_image(&self, scan: &str, viewpoint: &str, bbox: &BBox) -> Result<Vec<f64>>;
}

/// One continuation proposed by a language model: token id, its probability
/// given the context, and the model's representation of the token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub token: u32,
    pub p: f64,
    #[serde(rename = "r")]
    pub rep: Vec<f64>,
}

/// Token inventory of a language model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabularySpec {
    pub tokens: Vec<String>,
    pub bos: u32,
    pub eos: u32,
}

pub trait LanguageModel: Send + Sync {
    fn name(&self) -> &str;
    fn vocabulary(&self) -> Result<VocabularySpec>;
    /// Top-`k` continuations of `context` (generated ids, BOS implied),
    /// sorted by descending probability.
    fn step(&self, context: &[u32], cond: &serde_json::Value, k: usize) -> Result<Vec<Candidate>>;
}
