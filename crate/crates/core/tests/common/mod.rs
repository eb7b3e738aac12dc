#![allow(dead_code)]

pub mod oracle;

use std::path::PathBuf;

use navinstr::navgraph::{ConnectivityGraph, Vec3, Viewpoint};
use navinstr::provider::VocabularySpec;
use navinstr::speaker::{ToyLm, Vocabulary};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn fixture(name: &str) -> PathBuf {
    fixtures().join(name)
}

pub fn grid_fixture() -> ConnectivityGraph {
    navinstr::navgraph::load_graph(fixture("grid.json")).unwrap()
}

/// `n x m` 4-connected grid with jittered positions and random heights.
pub fn random_grid(rng: &mut ChaCha8Rng, n: usize, m: usize) -> ConnectivityGraph {
    let id = |r: usize, c: usize| format!("n{r}_{c}");
    let mut vps = Vec::new();
    for r in 0..n {
        for c in 0..m {
            vps.push(Viewpoint {
                id: id(r, c),
                position: Vec3::new(
                    c as f64 * 2.0 + rng.gen_range(-0.5..0.5),
                    r as f64 * 2.0 + rng.gen_range(-0.5..0.5),
                    rng.gen_range(-0.4..0.4),
                ),
            });
        }
    }
    let mut edges = Vec::new();
    for r in 0..n {
        for c in 0..m {
            if c + 1 < m {
                edges.push((id(r, c), id(r, c + 1)));
            }
            if r + 1 < n {
                edges.push((id(r, c), id(r + 1, c)));
            }
        }
    }
    ConnectivityGraph::new("rand", vps, &edges).unwrap()
}

/// Random bigram LM over `size` tokens (ids 0 and 1 are BOS and EOS) with
/// strictly positive rows summing to 1 and random representations.
pub fn random_toy_lm(rng: &mut ChaCha8Rng, size: usize, dim: usize) -> ToyLm {
    let tokens: Vec<String> = (0..size).map(|i| format!("w{i}")).collect();
    let vocab = Vocabulary::new(VocabularySpec { tokens, bos: 0, eos: 1 }).unwrap();
    let bigram = (0..size)
        .map(|_| {
            let raw: Vec<f64> = (0..size).map(|_| rng.gen_range(0.01..1.0)).collect();
            let total: f64 = raw.iter().sum::<f64>() * 1.000_001;
            raw.iter().map(|x| x / total).collect()
        })
        .collect();
    let reps = (0..size).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0) + 1e-3).collect()).collect();
    ToyLm::new(vocab, bigram, reps, 0.0).unwrap()
}

/// Plain greedy decoding straight off the full distribution: the most likely
/// token each step, lower id on ties, until EOS or `max_len` tokens.
pub fn greedy_oracle(lm: &ToyLm, max_len: usize) -> Vec<u32> {
    let cond = serde_json::Value::Null;
    let mut out = Vec::new();
    while out.len() < max_len {
        let dist = lm.distribution(&out, &cond);
        let mut best = 0usize;
        for (i, p) in dist.iter().enumerate() {
            if *p > dist[best] {
                best = i;
            }
        }
        if best as u32 == lm.vocab().eos {
            break;
        }
        out.push(best as u32);
    }
    out
}

/// Longest run of one token repeated back to back.
pub fn longest_repeat_run(tokens: &[u32]) -> usize {
    let mut best = 0;
    let mut run = 0;
    for (i, t) in tokens.iter().enumerate() {
        run = if i > 0 && tokens[i - 1] == *t { run + 1 } else { 1 };
        best = best.max(run);
    }
    best
}

/// Tokens w0..w{n-1} after BOS/EOS; each keeps repeating itself with
/// probability 0.9 and moves to the next with 0.1. One-hot representations.
pub fn repetition_lm(n: usize) -> ToyLm {
    let size = n + 2;
    let mut tokens = vec!["<s>".to_string(), "</s>".to_string()];
    tokens.extend((0..n).map(|i| format!("w{i}")));
    let vocab = Vocabulary::new(VocabularySpec { tokens, bos: 0, eos: 1 }).unwrap();
    let mut bigram = vec![vec![0.0; size]; size];
    bigram[0][2] = 0.9;
    bigram[0][3] = 0.1;
    for i in 0..n {
        let cur = 2 + i;
        let next = 2 + (i + 1) % n;
        bigram[cur][cur] = 0.9;
        bigram[cur][next] = 0.1;
    }
    let reps = (0..size).map(|i| (0..size).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    ToyLm::new(vocab, bigram, reps, 0.0).unwrap()
}
