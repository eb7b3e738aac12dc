mod common;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;

use common::oracle;
use navinstr::entities::{select_entity, EntitySpan, LandmarkEmbedding};
use navinstr::landmarks::{bbox_heading_bounds, BBox, Detection, HeadingBounds, Landmark};
use navinstr::metrics::{
    bleu4, cider, navigation_metrics, read_eval_input, rouge_l, BleuSmoothing, EvalCorpus, EvalInput, LanguageReport,
};
use navinstr::navgraph::{sample_trajectories, SamplingOptions};
use navinstr::provider::FixtureEmbedder;
use navinstr::speaker::{aggregate_panorama, contrastive_loss, PanoFeatures};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn grid_samples_are_shortest_paths() {
    let g = common::grid_fixture();
    let opts = SamplingOptions { seed: 1, count: Some(20), ..Default::default() };
    let trajs = sample_trajectories(&g, &opts).unwrap();
    assert_eq!(trajs.len(), 20);
    for t in &trajs {
        let path = t.path();
        let (a, b) = (&path[0], &path[path.len() - 1]);
        assert!((5..=7).contains(&t.steps()));
        assert_eq!(oracle::bfs_dist(&g, a)[b], t.steps());
        assert!(oracle::all_shortest_paths(&g, a, b).contains(&path), "{path:?} is not a shortest path");
    }
}

#[test]
fn path_graph_endpoints() {
    use navinstr::navgraph::{ConnectivityGraph, Vec3, Viewpoint};
    let ids = ["A", "B", "C", "D", "E", "F"];
    let vps = ids
        .iter()
        .enumerate()
        .map(|(i, id)| Viewpoint { id: id.to_string(), position: Vec3::new(i as f64, 0.0, 0.0) })
        .collect();
    let edges: Vec<(String, String)> = ids.windows(2).map(|w| (w[0].to_string(), w[1].to_string())).collect();
    let g = ConnectivityGraph::new("line", vps, &edges).unwrap();
    let five = SamplingOptions { min_steps: 5, max_steps: 5, seed: 3, count: None, ..Default::default() };
    let mut ends: Vec<(String, String)> =
        sample_trajectories(&g, &five).unwrap().iter().map(|t| (t.path()[0].clone(), t.path()[5].clone())).collect();
    ends.sort();
    assert_eq!(ends, [("A".into(), "F".into()), ("F".into(), "A".into())]);
    let seven = SamplingOptions { min_steps: 7, max_steps: 7, ..five };
    assert!(sample_trajectories(&g, &seven).unwrap().is_empty());
}

#[test]
fn bleu_matches_reference_implementation() {
    // value from nltk.translate.bleu_score.corpus_bleu with default weights
    let c = EvalCorpus::from_pairs(&[
        (
            "walk past the chair and turn left at the door",
            vec!["walk past the chair then turn left at the door", "go past the chair and turn left"],
        ),
        ("go up the stairs and wait near the big window", vec!["walk up the stairs and wait by the window"]),
    ])
    .unwrap();
    assert!((bleu4(&c) - 70.07790446641881).abs() < 1e-4);
}

fn random_items(rng: &mut ChaCha8Rng) -> Vec<(String, Vec<String>)> {
    const W: &[&str] = &["walk", "turn", "left", "the", "chair", "door", "past", "and", "stop", "up"];
    let sentence = |rng: &mut ChaCha8Rng| {
        let n = rng.gen_range(1..9);
        (0..n).map(|_| W[rng.gen_range(0..W.len())]).collect::<Vec<_>>().join(" ")
    };
    (0..rng.gen_range(1..5))
        .map(|_| {
            let h = sentence(rng);
            let refs = (0..rng.gen_range(1..4)).map(|_| sentence(rng)).collect();
            (h, refs)
        })
        .collect()
}

#[test]
fn rouge_and_cider_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..200 {
        let items = random_items(&mut rng);
        let c = EvalCorpus::from_pairs(&items).unwrap();
        assert!((rouge_l(&c) - oracle::rouge_l_oracle(&items)).abs() < 1e-6);
        assert!((cider(&c) - oracle::cider_oracle(&items)).abs() < 1e-4);
    }
}

#[test]
fn language_fixture_scores() {
    let input = read_eval_input(BufReader::new(File::open(common::fixture("eval_lang.jsonl")).unwrap())).unwrap();
    let EvalInput::Language(c) = input else { panic!("expected a language corpus") };
    let items: Vec<(String, Vec<String>)> = c.items().iter().map(|i| (i.hyp.clone(), i.refs.clone())).collect();
    let r = LanguageReport::compute(&c, BleuSmoothing::None);
    assert!((r.rouge_l - oracle::rouge_l_oracle(&items)).abs() < 1e-6);
    assert!((r.cider - oracle::cider_oracle(&items)).abs() < 1e-4);
    assert!((r.rouge_l - 81.10171586807101).abs() < 1e-6);
    assert!((r.cider - 4.653498348183297).abs() < 1e-4);
    assert!((r.bleu4 - 65.50718463735798).abs() < 1e-9);
    assert!((r.meteor - 77.68582805401657).abs() < 1e-9);
}

#[test]
fn navigation_fixture_scores() {
    let input = read_eval_input(BufReader::new(File::open(common::fixture("eval_nav.jsonl")).unwrap())).unwrap();
    let EvalInput::Navigation(eps) = input else { panic!("expected navigation episodes") };
    let r = navigation_metrics(&eps).unwrap();
    // lengths 5, 20, 4, 0; errors 0, 2, 6, 0; SPL terms 1, 0.5, 0, 1
    assert!((r.tl - 7.25).abs() < 1e-12);
    assert!((r.ne - 2.0).abs() < 1e-12);
    assert!((r.sr - 0.75).abs() < 1e-12);
    assert!((r.spl - 0.625).abs() < 1e-12);
}

#[test]
fn contrastive_loss_matches_double_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let n = rng.gen_range(2..8);
        let d = rng.gen_range(1..6);
        let reps: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0) + 1e-3).collect()).collect();
        let rho = rng.gen_range(0.0..1.0);
        let got = contrastive_loss(&reps, rho).unwrap();
        assert!((got - oracle::contrastive_loss_oracle(&reps, rho)).abs() < 1e-12);
    }
}

#[test]
fn aggregate_panorama_elementwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let views: Vec<Vec<f64>> = (0..36).map(|_| (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let got = aggregate_panorama(&PanoFeatures { views: views.clone(), oriented: 17 }).unwrap();
    for d in 0..5 {
        let mean = views.iter().map(|v| v[d]).sum::<f64>() / 36.0;
        assert!((got[d] - (mean + views[17][d])).abs() < 1e-12);
    }
}

#[test]
fn heading_bounds_follow_column_map() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let w = rng.gen_range(64..4096) as f64;
        let x0 = rng.gen_range(0.0..w - 1.0);
        let x1 = rng.gen_range(x0 + 0.5..w);
        let center = rng.gen_range(-180.0..180.0);
        let b = bbox_heading_bounds(&BBox::new(x0, 0.0, x1, 1.0), w, center).unwrap();
        assert!(oracle::angle_offset(b.min, oracle::column_heading(x0, w, center)).abs() < 1e-9);
        assert!((b.max - b.min - 360.0 * (x1 - x0) / w).abs() < 1e-9);
    }
}

fn landmark() -> Landmark {
    Landmark {
        viewpoint_id: "vp".into(),
        detection: Detection { label: "chair".into(), bbox: BBox::new(10.0, 10.0, 50.0, 50.0), confidence: 0.9 },
        heading_bounds: HeadingBounds { min: 0.0, max: 10.0 },
    }
}

fn span(text: &str, start: usize) -> EntitySpan {
    EntitySpan { text: text.into(), start, end: start + text.len(), normalized: text.into() }
}

#[test]
fn entity_choice_is_argmax_cosine() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let names = ["the chair", "the door", "the wooden table", "the hallway"];
    for _ in 0..200 {
        let mut text = BTreeMap::new();
        for n in names {
            text.insert(n.to_string(), (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>());
        }
        text.insert("chair".into(), (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let emb = FixtureEmbedder::new(text.clone(), BTreeMap::new());
        let cands: Vec<EntitySpan> = names.iter().enumerate().map(|(i, n)| span(n, i * 20)).collect();
        let got = select_entity("s", &landmark(), &cands, &emb, LandmarkEmbedding::Label).unwrap().unwrap();
        let target = &text["chair"];
        let cos = |v: &Vec<f64>| {
            let dot: f64 = v.iter().zip(target).map(|(a, b)| a * b).sum();
            dot / (v.iter().map(|x| x * x).sum::<f64>().sqrt() * target.iter().map(|x| x * x).sum::<f64>().sqrt())
        };
        let best = names.iter().max_by(|a, b| cos(&text[**a]).total_cmp(&cos(&text[**b]))).unwrap();
        assert_eq!(got.entity.text, *best);
    }
}
