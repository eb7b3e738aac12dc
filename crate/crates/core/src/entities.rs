//! Entity phrase extraction and entity-landmark matching.
//!
//! Candidates are maximal runs of word tokens separated only by whitespace
//! that contain no function word and no motion verb. Offsets are byte offsets
//! into the sub-instruction.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landmarks::Landmark;
use crate::provider::Embedder;
use crate::vector::cosine_similarity;

const DEFAULT_LEXICON: &str = include_str!("../data/lexicon.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySpan {
    pub text: String,
    pub start: usize,
    pub end: usize,
    pub normalized: String,
}

/// Closed word lists that can never be part of an entity phrase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    function_words: HashSet<String>,
    motion_verbs: HashSet<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LexiconFile {
    function_words: Vec<String>,
    motion_verbs: Vec<String>,
}

impl Lexicon {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: LexiconFile = serde_json::from_str(text).map_err(|e| Error::json("lexicon", e))?;
        let lower = |v: Vec<String>| v.into_iter().map(|w| w.to_lowercase()).collect();
        Ok(Self { function_words: lower(file.function_words), motion_verbs: lower(file.motion_verbs) })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn is_excluded(&self, word: &str) -> bool {
        let w = word.to_lowercase();
        self.function_words.contains(&w) || self.motion_verbs.contains(&w)
    }
}

impl Default for Lexicon {
    fn default() -> Self {
        Self::from_json_str(DEFAULT_LEXICON).expect("bundled lexicon parses")
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '-'
}

/// Word tokens with their byte ranges.
fn word_tokens(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (is_word_char(c), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, text.len()));
    }
    // strip leading/trailing apostrophes and hyphens
    out.into_iter()
        .filter_map(|(s, e)| {
            let tok = &text[s..e];
            let trimmed = tok.trim_matches(|c| c == '\'' || c == '-');
            if trimmed.is_empty() {
                return None;
            }
            let lead = tok.len() - tok.trim_start_matches(['\'', '-']).len();
            Some((s + lead, s + lead + trimmed.len()))
        })
        .collect()
}

pub fn extract_entity_candidates(sub_instruction: &str, lexicon: &Lexicon) -> Vec<EntitySpan> {
    let mut spans = Vec::new();
    let mut current: Option<(usize, usize)> = None;
    let flush = |cur: &mut Option<(usize, usize)>, spans: &mut Vec<EntitySpan>| {
        if let Some((s, e)) = cur.take() {
            let text = sub_instruction[s..e].to_string();
            spans.push(EntitySpan { normalized: text.to_lowercase(), text, start: s, end: e });
        }
    };
    for (s, e) in word_tokens(sub_instruction) {
        if lexicon.is_excluded(&sub_instruction[s..e]) {
            flush(&mut current, &mut spans);
            continue;
        }
        current = match current {
            Some((cs, ce)) if sub_instruction[ce..s].chars().all(char::is_whitespace) => Some((cs, e)),
            Some(_) => {
                flush(&mut current, &mut spans);
                Some((s, e))
            }
            None => Some((s, e)),
        };
    }
    flush(&mut current, &mut spans);
    spans
}

/// How the landmark side of the similarity is embedded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandmarkEmbedding {
    /// Image crop identified by scan, viewpoint and bbox.
    #[default]
    Crop,
    /// The detection label run through the text encoder.
    Label,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntityLandmarkPair {
    pub entity: EntitySpan,
    pub landmark: Landmark,
    pub similarity: f64,
}

/// Picks the candidate whose text embedding is most cosine-similar to the
/// landmark embedding; ties go to the earlier span. Candidates the embedder
/// cannot embed are skipped.
pub fn select_entity(
    scan: &str,
    landmark: &Landmark,
    candidates: &[EntitySpan],
    embedder: &dyn Embedder,
    mode: LandmarkEmbedding,
) -> Result<Option<EntityLandmarkPair>> {
    if candidates.is_empty() {
        return Ok(None);
    }
    let target = match mode {
        LandmarkEmbedding::Crop => embedder.embed_image(scan, &landmark.viewpoint_id, &landmark.detection.bbox)?,
        LandmarkEmbedding::Label => embedder.embed_text(&landmark.detection.label)?,
    };
    let mut ordered: Vec<&EntitySpan> = candidates.iter().collect();
    ordered.sort_by_key(|c| c.start);

    let mut best: Option<(f64, &EntitySpan)> = None;
    for cand in ordered {
        let vec = match embedder.embed_text(&cand.normalized) {
            Ok(v) => v,
            Err(e @ Error::Provider { .. }) => {
                log::warn!("skipping entity \"{}\": {e}", cand.text);
                continue;
            }
            Err(e) => return Err(e),
        };
        let sim = cosine_similarity(&vec, &target)?;
        if best.is_none_or(|(b, _)| sim > b) {
            best = Some((sim, cand));
        }
    }
    Ok(best.map(|(similarity, entity)| EntityLandmarkPair {
        entity: entity.clone(),
        landmark: landmark.clone(),
        similarity,
    }))
}
