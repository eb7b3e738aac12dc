//! Evaluation metrics: corpus-level language scores for generated
//! instructions and navigation scores for follower episodes.

mod language;
mod navigation;

use std::collections::HashSet;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use language::{
    bleu4, bleu4_with, cider, clipped_ngram_counts, meteor_lite, rouge_l, stem, tokenize, BleuSmoothing,
    LanguageReport, ROUGE_BETA,
};
pub use navigation::{navigation_metrics, NavEpisode, NavigationReport, SUCCESS_RADIUS_M};

/// One hypothesis with its references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalItem {
    pub id: String,
    pub hyp: String,
    pub refs: Vec<String>,
}

/// A non-empty list of items, each with at least one reference.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalCorpus {
    items: Vec<EvalItem>,
}

impl EvalCorpus {
    pub fn new(items: Vec<EvalItem>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::InvalidInput("empty evaluation corpus".into()));
        }
        if let Some(item) = items.iter().find(|i| i.refs.is_empty()) {
            return Err(Error::InvalidInput(format!("item \"{}\" has no references", item.id)));
        }
        Ok(Self { items })
    }

    /// Convenience constructor from `(hyp, refs)` pairs; ids are indices.
    pub fn from_pairs<H: AsRef<str>, R: AsRef<str>>(pairs: &[(H, Vec<R>)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .enumerate()
                .map(|(i, (h, refs))| EvalItem {
                    id: i.to_string(),
                    hyp: h.as_ref().to_string(),
                    refs: refs.iter().map(|r| r.as_ref().to_string()).collect(),
                })
                .collect(),
        )
    }

    pub fn items(&self) -> &[EvalItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EpisodeLine {
    id: String,
    path: Vec<[f64; 3]>,
    goal: [f64; 3],
    geodesic: f64,
}

/// The contents of an evaluation input file, detected from its schema.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalInput {
    Language(EvalCorpus),
    Navigation(Vec<NavEpisode>),
}

/// Reads an evaluation JSONL file. Every line must follow the same schema:
/// either `{"id","hyp","refs"}` or `{"id","path","goal","geodesic"}`.
pub fn read_eval_input<R: BufRead>(reader: R) -> Result<EvalInput> {
    let mut items = Vec::new();
    let mut episodes = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Record { line: line_no, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| Error::Record { line: line_no, message: e.to_string() })?;
        let keys: HashSet<&str> = value.as_object().map(|o| o.keys().map(String::as_str).collect()).unwrap_or_default();
        let bad = |message: String| Error::Record { line: line_no, message };
        if keys.contains("hyp") {
            if !episodes.is_empty() {
                return Err(bad("language item in a navigation episode file".into()));
            }
            items.push(serde_json::from_value::<EvalItem>(value).map_err(|e| bad(e.to_string()))?);
        } else if keys.contains("path") {
            if !items.is_empty() {
                return Err(bad("navigation episode in a language corpus file".into()));
            }
            let ep: EpisodeLine = serde_json::from_value(value).map_err(|e| bad(e.to_string()))?;
            episodes.push(
                NavEpisode::new(ep.id, ep.path.into_iter().map(Into::into).collect(), ep.goal.into(), ep.geodesic)
                    .map_err(|e| bad(e.to_string()))?,
            );
        } else {
            return Err(bad("neither a language item nor a navigation episode".into()));
        }
    }
    if !items.is_empty() {
        Ok(EvalInput::Language(EvalCorpus::new(items)?))
    } else if !episodes.is_empty() {
        Ok(EvalInput::Navigation(episodes))
    } else {
        Err(Error::InvalidInput("evaluation file is empty".into()))
    }
}

/// Sums after sorting so that the result does not depend on input order.
pub(crate) fn order_free_mean(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}
