//! Instruction rewriting: contrastive-search decoding over a pluggable
//! language model, plus the SimCTG training objective as pure functions.

mod toy_lm;

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::provider::{Candidate, LanguageModel, VocabularySpec};
use crate::templating::CraftedInstruction;
use crate::vector::{dot, norm};

pub use toy_lm::ToyLm;

/// Default prompt handed to the language model with every crafted instruction.
pub const REWRITE_PROMPT: &str = "Rewrite the following route description as a natural navigation instruction";

pub const VIEWS_PER_PANORAMA: usize = 36;

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    pub bos: u32,
    pub eos: u32,
}

impl Vocabulary {
    pub fn new(spec: VocabularySpec) -> Result<Self> {
        if spec.tokens.len() < 2 {
            return Err(Error::InvalidInput("vocabulary needs at least two tokens".into()));
        }
        let mut index = HashMap::with_capacity(spec.tokens.len());
        for (i, t) in spec.tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::InvalidInput(format!("duplicate token \"{t}\"")));
            }
        }
        let n = spec.tokens.len() as u32;
        if spec.bos >= n || spec.eos >= n {
            return Err(Error::InvalidInput("BOS/EOS id outside the vocabulary".into()));
        }
        Ok(Self { tokens: spec.tokens, index, bos: spec.bos, eos: spec.eos })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Joins tokens with single spaces, skipping BOS and EOS.
    pub fn detokenize(&self, ids: &[u32]) -> String {
        ids.iter()
            .filter(|&&id| id != self.bos && id != self.eos)
            .filter_map(|&id| self.token(id))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn spec(&self) -> VocabularySpec {
        VocabularySpec { tokens: self.tokens.clone(), bos: self.bos, eos: self.eos }
    }
}

/// View features of one panorama and the index of the view facing the next
/// step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanoFeatures {
    pub views: Vec<Vec<f64>>,
    pub oriented: usize,
}

/// Mean of the 36 view vectors plus the oriented view (residual).
pub fn aggregate_panorama(pano: &PanoFeatures) -> Result<Vec<f64>> {
    if pano.views.len() != VIEWS_PER_PANORAMA {
        return Err(Error::InvalidInput(format!(
            "panorama has {} views, expected {VIEWS_PER_PANORAMA}",
            pano.views.len()
        )));
    }
    if pano.oriented >= VIEWS_PER_PANORAMA {
        return Err(Error::InvalidInput(format!("oriented view {} out of range", pano.oriented)));
    }
    let dim = pano.views[0].len();
    let mut sum = vec![0.0; dim];
    for v in &pano.views {
        if v.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: v.len() });
        }
        for (s, x) in sum.iter_mut().zip(v) {
            *s += ensure_finite("view feature", *x)?;
        }
    }
    let oriented = &pano.views[pano.oriented];
    Ok(sum.iter().zip(oriented).map(|(s, o)| s / VIEWS_PER_PANORAMA as f64 + o).collect())
}

/// Negative mean log-likelihood of `targets` under per-step distributions.
pub fn mle_loss(step_probs: &[Vec<f64>], targets: &[u32]) -> Result<f64> {
    if step_probs.is_empty() || step_probs.len() != targets.len() {
        return Err(Error::InvalidInput(format!("{} distributions for {} targets", step_probs.len(), targets.len())));
    }
    let mut total = 0.0;
    for (step, (probs, &t)) in step_probs.iter().zip(targets).enumerate() {
        let p = *probs
            .get(t as usize)
            .ok_or_else(|| Error::InvalidInput(format!("target {t} outside distribution at step {step}")))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidInput(format!("probability {p} at step {step}")));
        }
        if p == 0.0 {
            return Err(Error::InfiniteLoss { step });
        }
        total -= p.ln();
    }
    Ok(total / targets.len() as f64)
}

/// Token-level contrastive loss: the mean over ordered pairs `i != j` of
/// `max(0, ρ − c(r_i, r_i) + c(r_i, r_j))` with `c` the cosine similarity.
pub fn contrastive_loss(reps: &[Vec<f64>], rho: f64) -> Result<f64> {
    if reps.len() < 2 {
        return Err(Error::InvalidInput("contrastive loss needs at least two tokens".into()));
    }
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::InvalidInput(format!("margin {rho} outside [-1, 1]")));
    }
    let dim = reps[0].len();
    let mut unit = Vec::with_capacity(reps.len());
    for r in reps {
        if r.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: r.len() });
        }
        if r.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { what: "representation", value: f64::NAN });
        }
        let n = norm(r);
        if n == 0.0 {
            return Err(Error::ZeroNorm);
        }
        unit.push(r.iter().map(|x| x / n).collect::<Vec<_>>());
    }
    let cos = |a: &[f64], b: &[f64]| dot(a, b).clamp(-1.0, 1.0);
    let n = reps.len();
    let mut total = 0.0;
    for i in 0..n {
        let self_sim = cos(&unit[i], &unit[i]);
        for j in (0..n).filter(|&j| j != i) {
            total += (rho + (cos(&unit[i], &unit[j]) - self_sim)).max(0.0);
        }
    }
    Ok(total / (n * (n - 1)) as f64)
}

pub fn simctg_loss(mle: f64, cl: f64) -> Result<f64> {
    Ok(ensure_finite("mle loss", mle)? + ensure_finite("contrastive loss", cl)?)
}

/// Picks the candidate maximizing
/// `(1 − α)·p(u) − α·max_j cos(r_u, r_j)` over the history; the penalty is 0
/// with no history. Ties go to the higher probability, then the lower id.
pub fn contrastive_search_step(candidates: &[Candidate], history: &[Vec<f64>], alpha: f64) -> Result<u32> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("no candidates".into()));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside [0, 1]")));
    }
    let history_norms: Vec<f64> = history.iter().map(|h| norm(h)).collect();
    if history_norms.contains(&0.0) {
        return Err(Error::ZeroNorm);
    }

    let mut best: Option<(f64, &Candidate)> = None;
    for cand in candidates {
        let cn = norm(&cand.rep);
        if cn == 0.0 || !cn.is_finite() {
            return Err(Error::ZeroNorm);
        }
        let mut penalty = f64::NEG_INFINITY;
        for (h, hn) in history.iter().zip(&history_norms) {
            if h.len() != cand.rep.len() {
                return Err(Error::DimensionMismatch { expected: h.len(), found: cand.rep.len() });
            }
            penalty = penalty.max((dot(&cand.rep, h) / (cn * hn)).clamp(-1.0, 1.0));
        }
        if history.is_empty() {
            penalty = 0.0;
        }
        let score = (1.0 - alpha) * cand.p - alpha * penalty;
        let better = match best {
            None => true,
            Some((bs, b)) => match score.total_cmp(&bs) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => match cand.p.total_cmp(&b.p) {
                    Ordering::Greater => true,
                    Ordering::Less => false,
                    Ordering::Equal => cand.token < b.token,
                },
            },
        };
        if better {
            best = Some((score, cand));
        }
    }
    Ok(best.map(|(_, c)| c.token).expect("non-empty candidates"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    pub k: usize,
    pub alpha: f64,
    pub max_len: usize,
}

impl DecodingParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidInput("k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidInput(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if self.max_len == 0 {
            return Err(Error::InvalidInput("max_len must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedInstruction {
    pub text: String,
    pub tokens: Vec<u32>,
    /// Set when `max_len` tokens were produced without reaching EOS.
    pub truncated: bool,
}

/// The opaque conditioning object sent with every LM step.
pub fn conditioning(prompt: &str, crafted: &CraftedInstruction, panoramas: &[Vec<f64>]) -> serde_json::Value {
    serde_json::json!({
        "prompt": prompt,
        "crafted": crafted.text,
        "panoramas": panoramas,
    })
}

/// Generates a sub-instruction token by token until EOS or `max_len`.
pub fn decode(
    prompt: &str,
    crafted: &CraftedInstruction,
    panos: &[PanoFeatures],
    lm: &dyn LanguageModel,
    vocab: &Vocabulary,
    params: &DecodingParams,
) -> Result<GeneratedInstruction> {
    params.validate()?;
    let panoramas = panos.iter().map(aggregate_panorama).collect::<Result<Vec<_>>>()?;
    let cond = conditioning(prompt, crafted, &panoramas);

    let mut tokens = Vec::new();
    let mut history: Vec<Vec<f64>> = Vec::new();
    for _ in 0..params.max_len {
        let mut candidates = lm.step(&tokens, &cond, params.k)?;
        for c in &candidates {
            if !(0.0..=1.0).contains(&c.p) || c.token as usize >= vocab.len() {
                return Err(Error::Provider {
                    provider: lm.name().to_string(),
                    id: 0,
                    message: format!("invalid candidate token {} with p={}", c.token, c.p),
                });
            }
        }
        candidates.sort_by(|a, b| b.p.total_cmp(&a.p).then(a.token.cmp(&b.token)));
        candidates.truncate(params.k);
        let chosen = contrastive_search_step(&candidates, &history, params.alpha)?;
        if chosen == vocab.eos {
            return Ok(GeneratedInstruction { text: vocab.detokenize(&tokens), tokens, truncated: false });
        }
        let rep =
            candidates.iter().find(|c| c.token == chosen).map(|c| c.rep.clone()).expect("chosen among candidates");
        tokens.push(chosen);
        history.push(rep);
    }
    Ok(GeneratedInstruction { text: vocab.detokenize(&tokens), tokens, truncated: true })
}
