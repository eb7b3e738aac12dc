//! BLEU-4, ROUGE-L, CIDEr and a lightweight METEOR.
//!
//! All scores use the same tokenization: lowercase, drop every character
//! that is neither alphanumeric nor whitespace, split on whitespace.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{order_free_mean, EvalCorpus};

pub const ROUGE_BETA: f64 = 1.2;
const MAX_N: usize = 4;

pub fn tokenize(text: &str) -> Vec<String> {
    let cleaned: String =
        text.chars().filter(|c| c.is_alphanumeric() || c.is_whitespace()).flat_map(char::to_lowercase).collect();
    cleaned.split_whitespace().map(str::to_owned).collect()
}

type Counts = HashMap<Vec<String>, usize>;

fn ngram_counts(tokens: &[String], n: usize) -> Counts {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w.to_vec()).or_insert(0) += 1;
        }
    }
    counts
}

/// `(clipped matches, total)` n-gram counts of a tokenized hypothesis
/// against its tokenized references.
pub fn clipped_ngram_counts(hyp: &[String], refs: &[Vec<String>], n: usize) -> (usize, usize) {
    let mut max_ref: Counts = HashMap::new();
    for r in refs {
        for (g, c) in ngram_counts(r, n) {
            let e = max_ref.entry(g).or_insert(0);
            *e = (*e).max(c);
        }
    }
    let mut matched = 0;
    let mut total = 0;
    for (g, c) in ngram_counts(hyp, n) {
        matched += c.min(max_ref.get(&g).copied().unwrap_or(0));
        total += c;
    }
    (matched, total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BleuSmoothing {
    /// Zero matches at any order give a score of zero.
    #[default]
    None,
    /// Add one to numerator and denominator for orders 2 to 4.
    AddOne,
}

pub fn bleu4(corpus: &EvalCorpus) -> f64 {
    bleu4_with(corpus, BleuSmoothing::None)
}

/// Corpus BLEU with uniform weights over the n-gram orders the hypotheses
/// actually contain (all four for any hypothesis of four or more tokens),
/// clipped counts, closest-reference brevity penalty, scaled to 0..100.
pub fn bleu4_with(corpus: &EvalCorpus, smoothing: BleuSmoothing) -> f64 {
    let mut matched = [0usize; MAX_N];
    let mut total = [0usize; MAX_N];
    let mut hyp_len = 0usize;
    let mut ref_len = 0usize;

    for item in corpus.items() {
        let hyp = tokenize(&item.hyp);
        let refs: Vec<Vec<String>> = item.refs.iter().map(|r| tokenize(r)).collect();
        hyp_len += hyp.len();
        // closest reference length, shorter on ties
        ref_len += refs.iter().map(|r| r.len()).min_by_key(|&l| (l.abs_diff(hyp.len()), l)).unwrap_or(0);

        for n in 1..=MAX_N {
            let (m, t) = clipped_ngram_counts(&hyp, &refs, n);
            matched[n - 1] += m;
            total[n - 1] += t;
        }
    }

    if hyp_len == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    let mut orders = 0;
    for n in 0..MAX_N {
        if total[n] == 0 {
            continue;
        }
        let (m, t) = match smoothing {
            BleuSmoothing::AddOne if n > 0 => (matched[n] as f64 + 1.0, total[n] as f64 + 1.0),
            _ => (matched[n] as f64, total[n] as f64),
        };
        if m == 0.0 {
            return 0.0;
        }
        log_sum += (m / t).ln();
        orders += 1;
    }
    let bp = if hyp_len > ref_len { 1.0 } else { (1.0 - ref_len as f64 / hyp_len as f64).exp() };
    100.0 * bp * (log_sum / orders as f64).exp()
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn rouge_l_pair(hyp: &[String], reference: &[String]) -> f64 {
    let lcs = lcs_len(hyp, reference);
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / hyp.len() as f64;
    let r = lcs as f64 / reference.len() as f64;
    let b2 = ROUGE_BETA * ROUGE_BETA;
    (1.0 + b2) * p * r / (r + b2 * p)
}

/// Mean per-item LCS F-measure (recall-weighted by beta = 1.2), taking the
/// best reference for each item, scaled to 0..100.
pub fn rouge_l(corpus: &EvalCorpus) -> f64 {
    let scores = corpus
        .items()
        .iter()
        .map(|item| {
            let hyp = tokenize(&item.hyp);
            item.refs.iter().map(|r| rouge_l_pair(&hyp, &tokenize(r))).fold(0.0, f64::max)
        })
        .collect();
    100.0 * order_free_mean(scores)
}

fn tfidf(tokens: &[String], n: usize, df: &HashMap<Vec<String>, usize>, log_n: f64) -> BTreeMap<Vec<String>, f64> {
    let counts = ngram_counts(tokens, n);
    let total: usize = counts.values().sum();
    counts
        .into_iter()
        .map(|(g, c)| {
            let d = df.get(&g).copied().unwrap_or(0).max(1) as f64;
            let w = c as f64 / total as f64 * (log_n - d.ln());
            (g, w)
        })
        .collect()
}

fn cosine(a: &BTreeMap<Vec<String>, f64>, b: &BTreeMap<Vec<String>, f64>) -> f64 {
    let norm = |v: &BTreeMap<Vec<String>, f64>| v.values().map(|x| x * x).sum::<f64>().sqrt();
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().filter_map(|(g, x)| b.get(g).map(|y| x * y)).sum();
    dot / (na * nb)
}

/// Base CIDEr: tf-idf vectors for 1- to 4-grams with document frequency
/// counted over the items' reference sets, cosine averaged over references
/// and orders, times 10, averaged over items. No length penalty or clipping.
pub fn cider(corpus: &EvalCorpus) -> f64 {
    let items: Vec<(Vec<String>, Vec<Vec<String>>)> =
        corpus.items().iter().map(|i| (tokenize(&i.hyp), i.refs.iter().map(|r| tokenize(r)).collect())).collect();
    let log_n = (items.len() as f64).ln();

    let mut per_item = vec![0.0; items.len()];
    for n in 1..=MAX_N {
        let mut df: HashMap<Vec<String>, usize> = HashMap::new();
        for (_, refs) in &items {
            let mut seen = HashSet::new();
            for r in refs {
                if r.len() >= n {
                    seen.extend(r.windows(n).map(|w| w.to_vec()));
                }
            }
            for g in seen {
                *df.entry(g).or_insert(0) += 1;
            }
        }
        for (score, (hyp, refs)) in per_item.iter_mut().zip(&items) {
            let h = tfidf(hyp, n, &df, log_n);
            let mut sims: Vec<f64> = refs.iter().map(|r| cosine(&h, &tfidf(r, n, &df, log_n))).collect();
            sims.sort_by(f64::total_cmp);
            *score += sims.iter().sum::<f64>() / refs.len() as f64;
        }
    }
    10.0 * order_free_mean(per_item.into_iter().map(|s| s / MAX_N as f64).collect())
}

/// Suffix-stripping stemmer used for the second METEOR matching stage.
pub fn stem(word: &str) -> &str {
    const SUFFIXES: [&str; 7] = ["ingly", "edly", "ing", "ed", "es", "ly", "s"];
    for suf in SUFFIXES {
        if let Some(base) = word.strip_suffix(suf) {
            if base.chars().count() < 3 || (suf == "s" && base.ends_with('s')) {
                continue;
            }
            return base;
        }
    }
    word
}

/// Greedy two-stage unigram alignment (exact, then stem), returning matched
/// `(hyp_index, ref_index)` pairs sorted by hypothesis position.
fn align(hyp: &[String], reference: &[String]) -> Vec<(usize, usize)> {
    let mut used_h = vec![false; hyp.len()];
    let mut used_r = vec![false; reference.len()];
    let mut pairs = Vec::new();
    let stages: [fn(&str) -> &str; 2] = [|w| w, stem];
    for key in stages {
        for (i, h) in hyp.iter().enumerate() {
            if used_h[i] {
                continue;
            }
            if let Some(j) = (0..reference.len()).find(|&j| !used_r[j] && key(&reference[j]) == key(h)) {
                used_h[i] = true;
                used_r[j] = true;
                pairs.push((i, j));
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

fn meteor_pair(hyp: &[String], reference: &[String]) -> f64 {
    let pairs = align(hyp, reference);
    let m = pairs.len();
    if m == 0 {
        return 0.0;
    }
    let chunks = 1 + pairs.windows(2).filter(|w| w[1].0 != w[0].0 + 1 || w[1].1 != w[0].1 + 1).count();
    let p = m as f64 / hyp.len() as f64;
    let r = m as f64 / reference.len() as f64;
    let fmean = 10.0 * p * r / (r + 9.0 * p);
    let penalty = 0.5 * (chunks as f64 / m as f64).powi(3);
    fmean * (1.0 - penalty)
}

/// METEOR without synonym matching: exact then stem alignment, recall-heavy
/// harmonic mean, fragmentation penalty `0.5 (chunks / matches)^3`; best
/// reference per item, mean over items, scaled to 0..100.
pub fn meteor_lite(corpus: &EvalCorpus) -> f64 {
    let scores = corpus
        .items()
        .iter()
        .map(|item| {
            let hyp = tokenize(&item.hyp);
            item.refs.iter().map(|r| meteor_pair(&hyp, &tokenize(r))).fold(0.0, f64::max)
        })
        .collect();
    100.0 * order_free_mean(scores)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LanguageReport {
    pub bleu4: f64,
    pub meteor: f64,
    pub rouge_l: f64,
    pub cider: f64,
}

impl LanguageReport {
    pub fn compute(corpus: &EvalCorpus, smoothing: BleuSmoothing) -> Self {
        Self {
            bleu4: bleu4_with(corpus, smoothing),
            meteor: meteor_lite(corpus),
            rouge_l: rouge_l(corpus),
            cider: cider(corpus),
        }
    }
}
