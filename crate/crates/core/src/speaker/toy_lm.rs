use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::Vocabulary;
use crate::error::{Error, Result};
use crate::provider::{Candidate, LanguageModel, VocabularySpec};

/// A bigram language model with fixed per-token representations.
///
/// When `copy_weight > 0` and the conditioning object carries a `crafted`
/// string, that share of the probability mass goes to the next crafted token
/// not yet reproduced (or to EOS once all have been), and the bigram row is
/// scaled by `1 - copy_weight`. This makes the model a crude rewriter of the
/// crafted instruction.
#[derive(Debug, Clone)]
pub struct ToyLm {
    name: String,
    vocab: Vocabulary,
    /// Dense `V × V` table: row = previous token (BOS at the start).
    bigram: Vec<Vec<f64>>,
    reps: Vec<Vec<f64>>,
    copy_weight: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ToyLmFile {
    tokens: Vec<String>,
    bos: String,
    eos: String,
    bigram: BTreeMap<String, BTreeMap<String, f64>>,
    reps: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    copy_weight: f64,
}

impl ToyLm {
    pub fn new(vocab: Vocabulary, bigram: Vec<Vec<f64>>, reps: Vec<Vec<f64>>, copy_weight: f64) -> Result<Self> {
        let v = vocab.len();
        if bigram.len() != v || bigram.iter().any(|row| row.len() != v) {
            return Err(Error::InvalidInput(format!("bigram table must be {v}x{v}")));
        }
        for (i, row) in bigram.iter().enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::InvalidInput(format!("bigram row {i} has a probability outside [0, 1]")));
            }
            if row.iter().sum::<f64>() > 1.0 + 1e-9 {
                return Err(Error::InvalidInput(format!("bigram row {i} sums above 1")));
            }
        }
        if reps.len() != v {
            return Err(Error::InvalidInput(format!("{} representations for {v} tokens", reps.len())));
        }
        let dim = reps[0].len();
        for r in &reps {
            if r.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: r.len() });
            }
            if r.iter().all(|x| *x == 0.0) || r.iter().any(|x| !x.is_finite()) {
                return Err(Error::ZeroNorm);
            }
        }
        if !(0.0..=1.0).contains(&copy_weight) {
            return Err(Error::InvalidInput(format!("copy_weight {copy_weight} outside [0, 1]")));
        }
        Ok(Self { name: "toy-lm".into(), vocab, bigram, reps, copy_weight })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ToyLmFile = serde_json::from_str(text).map_err(|e| Error::json("toy LM", e))?;
        let lookup = |tok: &str| -> Result<u32> {
            file.tokens
                .iter()
                .position(|t| t == tok)
                .map(|i| i as u32)
                .ok_or_else(|| Error::Schema(format!("toy LM references unknown token \"{tok}\"")))
        };
        let vocab = Vocabulary::new(VocabularySpec {
            tokens: file.tokens.clone(),
            bos: lookup(&file.bos)?,
            eos: lookup(&file.eos)?,
        })?;
        let v = vocab.len();
        let mut bigram = vec![vec![0.0; v]; v];
        for (prev, row) in &file.bigram {
            let i = lookup(prev)? as usize;
            for (next, &p) in row {
                bigram[i][lookup(next)? as usize] = p;
            }
        }
        let mut reps = vec![Vec::new(); v];
        for (tok, r) in &file.reps {
            reps[lookup(tok)? as usize] = r.clone();
        }
        if let Some(i) = reps.iter().position(Vec::is_empty) {
            return Err(Error::Schema(format!("token \"{}\" has no representation", file.tokens[i])));
        }
        Self::new(vocab, bigram, reps, file.copy_weight)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lm = Self::from_json_str(&text)?;
        lm.name = format!("toy-lm:{}", path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default());
        Ok(lm)
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn representation(&self, token: u32) -> &[f64] {
        &self.reps[token as usize]
    }

    /// Next-token probabilities over the whole vocabulary.
    pub fn distribution(&self, context: &[u32], cond: &serde_json::Value) -> Vec<f64> {
        let prev = context.last().copied().unwrap_or(self.vocab.bos) as usize;
        let row = self.bigram.get(prev).cloned().unwrap_or_else(|| vec![0.0; self.vocab.len()]);
        let crafted = cond.get("crafted").and_then(|c| c.as_str());
        match crafted {
            Some(text) if self.copy_weight > 0.0 => {
                let mut dist: Vec<f64> = row.iter().map(|p| p * (1.0 - self.copy_weight)).collect();
                let target: Vec<String> = text.split_whitespace().map(str::to_lowercase).collect();
                let mut pointer = 0;
                for &id in context {
                    if pointer < target.len() && self.vocab.token(id) == Some(target[pointer].as_str()) {
                        pointer += 1;
                    }
                }
                let next = match target.get(pointer) {
                    Some(tok) => self.vocab.id(tok),
                    None => Some(self.vocab.eos),
                };
                if let Some(id) = next {
                    dist[id as usize] += self.copy_weight;
                }
                dist
            }
            _ => row,
        }
    }
}

impl LanguageModel for ToyLm {
    fn name(&self) -> &str {
        &self.name
    }

    fn vocabulary(&self) -> Result<VocabularySpec> {
        Ok(self.vocab.spec())
    }

    fn step(&self, context: &[u32], cond: &serde_json::Value, k: usize) -> Result<Vec<Candidate>> {
        if let Some(&bad) = context.iter().find(|&&id| id as usize >= self.vocab.len()) {
            return Err(Error::InvalidInput(format!("context token {bad} outside the vocabulary")));
        }
        let mut ranked: Vec<(u32, f64)> = self
            .distribution(context, cond)
            .into_iter()
            .enumerate()
            .filter(|(_, p)| *p > 0.0)
            .map(|(i, p)| (i as u32, p))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(k);
        Ok(ranked
            .into_iter()
            .map(|(token, p)| Candidate { token, p, rep: self.reps[token as usize].clone() })
            .collect())
    }
}
