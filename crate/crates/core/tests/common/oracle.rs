//! Slow, independent reference implementations used to check the library.

use std::collections::{BTreeMap, VecDeque};

use navinstr::landmarks::{BBox, Detection};
use navinstr::navgraph::ConnectivityGraph;

/// Hop distances from `src` by plain BFS over the adjacency predicate.
pub fn bfs_dist(graph: &ConnectivityGraph, src: &str) -> BTreeMap<String, usize> {
    let ids: Vec<&str> = graph.viewpoints().iter().map(|v| v.id.as_str()).collect();
    let mut dist = BTreeMap::new();
    dist.insert(src.to_string(), 0);
    let mut queue = VecDeque::from([src.to_string()]);
    while let Some(u) = queue.pop_front() {
        let d = dist[&u];
        for v in &ids {
            if !dist.contains_key(*v) && graph.is_adjacent(&u, v) {
                dist.insert(v.to_string(), d + 1);
                queue.push_back(v.to_string());
            }
        }
    }
    dist
}

/// Every shortest path from `a` to `b`, by exhaustive depth-first search
/// along edges that step one hop closer to `b`.
pub fn all_shortest_paths(graph: &ConnectivityGraph, a: &str, b: &str) -> Vec<Vec<String>> {
    let to_b = bfs_dist(graph, b);
    let ids: Vec<String> = graph.viewpoints().iter().map(|v| v.id.clone()).collect();
    let mut out = Vec::new();
    let mut stack = vec![vec![a.to_string()]];
    while let Some(path) = stack.pop() {
        let last = path.last().unwrap();
        if last == b {
            out.push(path);
            continue;
        }
        let d = to_b[last];
        for v in &ids {
            if to_b.get(v) == Some(&(d - 1)) && graph.is_adjacent(last, v) {
                let mut next = path.clone();
                next.push(v.clone());
                stack.push(next);
            }
        }
    }
    out
}

/// Longest common subsequence by enumerating every subsequence of the
/// shorter sequence.
pub fn lcs_brute(a: &[String], b: &[String]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    assert!(short.len() <= 16);
    let is_subseq = |sub: &[&String]| {
        let mut it = long.iter();
        sub.iter().all(|s| it.any(|x| x == *s))
    };
    let mut best = 0;
    for mask in 0u32..(1 << short.len()) {
        let sub: Vec<&String> = (0..short.len()).filter(|i| mask & (1 << i) != 0).map(|i| &short[i]).collect();
        if sub.len() > best && is_subseq(&sub) {
            best = sub.len();
        }
    }
    best
}

pub fn tokens(s: &str) -> Vec<String> {
    s.to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect::<String>()
        .split_whitespace()
        .map(String::from)
        .collect()
}

pub fn rouge_l_oracle(items: &[(String, Vec<String>)]) -> f64 {
    let beta2 = 1.2f64 * 1.2;
    let mut total = 0.0;
    for (hyp, refs) in items {
        let h = tokens(hyp);
        let mut best = 0.0f64;
        for r in refs {
            let r = tokens(r);
            let l = lcs_brute(&h, &r) as f64;
            if l == 0.0 {
                continue;
            }
            let p = l / h.len() as f64;
            let rc = l / r.len() as f64;
            best = best.max((1.0 + beta2) * p * rc / (rc + beta2 * p));
        }
        total += best;
    }
    100.0 * total / items.len() as f64
}

fn ngrams(t: &[String], n: usize) -> Vec<Vec<String>> {
    if t.len() < n {
        return Vec::new();
    }
    (0..=t.len() - n).map(|i| t[i..i + n].to_vec()).collect()
}

/// CIDEr computed straight from the definition with list-based counting.
pub fn cider_oracle(items: &[(String, Vec<String>)]) -> f64 {
    let n_items = items.len() as f64;
    let toks: Vec<(Vec<String>, Vec<Vec<String>>)> =
        items.iter().map(|(h, rs)| (tokens(h), rs.iter().map(|r| tokens(r)).collect())).collect();
    let mut score = vec![0.0; items.len()];
    for n in 1..=4 {
        let df = |g: &Vec<String>| -> f64 {
            let c = toks.iter().filter(|(_, rs)| rs.iter().any(|r| ngrams(r, n).contains(g))).count();
            (c.max(1)) as f64
        };
        let vector = |t: &[String]| -> Vec<(Vec<String>, f64)> {
            let grams = ngrams(t, n);
            let mut uniq: Vec<Vec<String>> = grams.clone();
            uniq.sort();
            uniq.dedup();
            uniq.into_iter()
                .map(|g| {
                    let tf = grams.iter().filter(|x| **x == g).count() as f64 / grams.len() as f64;
                    let w = tf * (n_items.ln() - df(&g).ln());
                    (g, w)
                })
                .collect()
        };
        let cos = |a: &[(Vec<String>, f64)], b: &[(Vec<String>, f64)]| -> f64 {
            let na = a.iter().map(|x| x.1 * x.1).sum::<f64>().sqrt();
            let nb = b.iter().map(|x| x.1 * x.1).sum::<f64>().sqrt();
            if na == 0.0 || nb == 0.0 {
                return 0.0;
            }
            let dot: f64 = a.iter().map(|(g, x)| b.iter().find(|(h, _)| h == g).map_or(0.0, |(_, y)| x * y)).sum();
            dot / (na * nb)
        };
        for (i, (h, rs)) in toks.iter().enumerate() {
            let hv = vector(h);
            let s: f64 = rs.iter().map(|r| cos(&hv, &vector(r))).sum();
            score[i] += s / rs.len() as f64 / 4.0;
        }
    }
    10.0 * score.iter().sum::<f64>() / items.len() as f64
}

/// Pairwise margin loss by a direct double loop over unnormalized vectors.
pub fn contrastive_loss_oracle(reps: &[Vec<f64>], rho: f64) -> f64 {
    let cos = |a: &[f64], b: &[f64]| {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    };
    let n = reps.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += f64::max(0.0, rho - cos(&reps[i], &reps[i]) + cos(&reps[i], &reps[j]));
            }
        }
    }
    total / (n * (n - 1)) as f64
}

/// Heading faced by pixel column `x` of a panorama `width` columns wide
/// whose center column faces `center`.
pub fn column_heading(x: f64, width: f64, center: f64) -> f64 {
    center - 180.0 + 360.0 * x / width
}

/// Signed offset of `a` from `b` in degrees, in (-180, 180].
pub fn angle_offset(a: f64, b: f64) -> f64 {
    let r = (a - b).rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// Best detection facing `heading`: box center within the half-open
/// half-circle around it, ranked by confidence, label, then box.
pub fn best_detection_oracle(dets: &[Detection], heading: f64, width: f64, center: f64) -> Option<Detection> {
    let mut inside: Vec<&Detection> = dets
        .iter()
        .filter(|d| {
            let c = column_heading((d.bbox.x_min + d.bbox.x_max) / 2.0, width, center);
            let off = angle_offset(c, heading);
            off > -90.0 && off <= 90.0
        })
        .collect();
    let key = |d: &Detection| {
        let BBox { x_min, y_min, x_max, y_max } = d.bbox;
        (-d.confidence, d.label.clone(), x_min, x_max, y_min, y_max)
    };
    inside.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
    inside.first().map(|d| (*d).clone())
}
