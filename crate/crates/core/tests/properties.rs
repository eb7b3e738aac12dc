mod common;

use std::collections::BTreeMap;

use navinstr::assembly::{integrate_sub_pairs, SubPair};
use navinstr::chunking::{
    chunk_trajectory, classify_horizontal, classify_vertical, HorizontalClass, SubTrajectoryKind,
};
use navinstr::entities::EntitySpan;
use navinstr::landmarks::{best_in_sector, detection_sector, BBox, Detection, PanoramaGeometry};
use navinstr::metrics::{
    bleu4, cider, clipped_ngram_counts, meteor_lite, navigation_metrics, rouge_l, tokenize, EvalCorpus, EvalItem,
    NavEpisode,
};
use navinstr::navgraph::{normalize_heading, sample_trajectories, SamplingOptions, Vec3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const WORDS: &[&str] =
    &["walk", "turn", "left", "right", "the", "chair", "door", "past", "and", "stop", "stairs", "up", "down", "table"];

fn sentence() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(WORDS), 0..9).prop_map(|w| w.join(" "))
}

fn corpus_items() -> impl Strategy<Value = Vec<(String, Vec<String>)>> {
    prop::collection::vec((sentence(), prop::collection::vec(sentence(), 1..4)), 1..6)
}

fn corpus(items: &[(String, Vec<String>)]) -> EvalCorpus {
    EvalCorpus::new(
        items
            .iter()
            .enumerate()
            .map(|(i, (h, r))| EvalItem { id: i.to_string(), hyp: h.clone(), refs: r.clone() })
            .collect(),
    )
    .unwrap()
}

fn scores(c: &EvalCorpus) -> [f64; 4] {
    [bleu4(c), meteor_lite(c), rouge_l(c), cider(c)]
}

proptest! {
    #[test]
    fn normalized_heading_in_range_and_congruent(d in -2000.0f64..2000.0) {
        let n = normalize_heading(d);
        prop_assert!(n > -180.0 && n <= 180.0);
        let k = (d - n) / 360.0;
        prop_assert!((k - k.round()).abs() < 1e-9);
    }

    #[test]
    fn horizontal_classes_mirror(d in 0.0f64..180.0) {
        let right = classify_horizontal(d).unwrap();
        let left = classify_horizontal(-d).unwrap();
        use HorizontalClass::*;
        let mirrored = match right {
            SlightRight => SlightLeft,
            ModerateRight => ModerateLeft,
            HardRight => HardLeft,
            SlightRightRear => SlightLeftRear,
            SharpRightRear => SharpLeftRear,
            other => other,
        };
        prop_assert_eq!(left, mirrored);
    }

    #[test]
    fn vertical_class_is_sign_symmetric(z in -5.0f64..5.0) {
        let up = classify_vertical(z).unwrap();
        let down = classify_vertical(-z).unwrap();
        prop_assert_eq!(up.key() == "level", down.key() == "level");
    }

    #[test]
    fn sampled_chunks_partition(seed in 0u64..500, n in 6usize..10, m in 6usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = common::random_grid(&mut rng, n, m);
        let opts = SamplingOptions { seed, count: Some(3), ..Default::default() };
        for traj in sample_trajectories(&g, &opts).unwrap() {
            prop_assert!((5..=7).contains(&traj.steps()));
            let subs = chunk_trajectory(&traj).unwrap();
            let mut next = 0;
            for s in &subs {
                prop_assert_eq!(s.steps.start, next);
                prop_assert!(s.steps.end > s.steps.start);
                if s.kind == SubTrajectoryKind::SingleTurn {
                    prop_assert_eq!(s.steps.len(), 1);
                }
                next = s.steps.end;
            }
            prop_assert_eq!(next, traj.steps());
            for w in subs.windows(2) {
                let both_straight = w[0].kind == SubTrajectoryKind::StraightRun
                    && w[1].kind == SubTrajectoryKind::StraightRun;
                prop_assert!(!both_straight);
            }
        }
    }

    #[test]
    fn global_spans_point_at_entities(
        segs in prop::collection::vec(
            (prop::collection::vec(prop::sample::select(WORDS), 1..7), any::<prop::sample::Index>(), 0usize..3, 0usize..3, any::<bool>()),
            1..6,
        ),
    ) {
        let pairs: Vec<SubPair> = segs
            .iter()
            .enumerate()
            .map(|(i, (words, pick, pad, dots, with_entity))| {
                let body = words.join(" ");
                let raw = format!("{}{}{}", " ".repeat(*pad), body, ".".repeat(*dots));
                let w = pick.index(words.len());
                let start = pad + words[..w].iter().map(|x| x.len() + 1).sum::<usize>();
                let text = words[w].to_string();
                let entity = with_entity.then(|| EntitySpan {
                    end: start + text.len(),
                    start,
                    normalized: text.clone(),
                    text,
                });
                SubPair { steps: i..i + 1, sub_instruction: raw, entity, landmark: None }
            })
            .collect();
        let out = integrate_sub_pairs(&pairs, ". ").unwrap();
        prop_assert!(out.instruction.ends_with('.'));
        for (seg, pair) in out.segments.iter().zip(&pairs) {
            if let (Some(g), Some(l)) = (&seg.entity, &pair.entity) {
                prop_assert_eq!(&out.instruction[g.start..g.end], g.text.as_str());
                prop_assert!(g.text.eq_ignore_ascii_case(&l.text));
                prop_assert!(seg.text_span.start <= g.start && g.end <= seg.text_span.end);
            }
        }
    }

    #[test]
    fn removing_a_matched_unigram_never_raises_precision(
        hyp in prop::collection::vec(prop::sample::select(WORDS), 2..10),
        refs in prop::collection::vec(prop::collection::vec(prop::sample::select(WORDS), 1..10), 1..3),
        pick in any::<prop::sample::Index>(),
    ) {
        let hyp: Vec<String> = hyp.iter().map(|s| s.to_string()).collect();
        let refs: Vec<Vec<String>> = refs.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect();
        let i = pick.index(hyp.len());
        let word = &hyp[i];
        let in_hyp = hyp.iter().filter(|w| *w == word).count();
        let max_ref = refs.iter().map(|r| r.iter().filter(|w| *w == word).count()).max().unwrap();
        // every occurrence of the word is a clipped match
        prop_assume!(max_ref >= in_hyp);
        let (m, t) = clipped_ngram_counts(&hyp, &refs, 1);
        let mut shorter = hyp.clone();
        shorter.remove(i);
        let (m2, t2) = clipped_ngram_counts(&shorter, &refs, 1);
        prop_assert_eq!(m2 + 1, m);
        prop_assert!((m2 as f64) / (t2 as f64) <= (m as f64) / (t as f64));
    }

    #[test]
    fn language_scores_ignore_item_and_reference_order(items in corpus_items(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shuffled = items.clone();
        shuffled.shuffle(&mut rng);
        for (_, refs) in &mut shuffled {
            refs.shuffle(&mut rng);
        }
        prop_assert_eq!(scores(&corpus(&items)), scores(&corpus(&shuffled)));
    }

    #[test]
    fn language_scores_are_bounded(items in corpus_items()) {
        let c = corpus(&items);
        let [b, m, r, ci] = scores(&c);
        for s in [b, m, r] {
            prop_assert!((0.0..=100.0 + 1e-9).contains(&s));
        }
        prop_assert!(ci >= 0.0 && ci.is_finite());
    }

    #[test]
    fn identical_corpus_scores_full(items in prop::collection::vec(sentence(), 1..5)) {
        prop_assume!(items.iter().all(|s| !tokenize(s).is_empty()));
        let pairs: Vec<(String, Vec<String>)> = items.iter().map(|s| (s.clone(), vec![s.clone()])).collect();
        let c = corpus(&pairs);
        prop_assert!((bleu4(&c) - 100.0).abs() < 1e-9);
        prop_assert!((rouge_l(&c) - 100.0).abs() < 1e-9);
    }

    #[test]
    fn spl_never_exceeds_success(
        eps in prop::collection::vec(
            (prop::collection::vec((-20.0f64..20.0, -20.0f64..20.0), 1..6), (-20.0f64..20.0, -20.0f64..20.0), 0.0f64..30.0),
            1..8,
        ),
    ) {
        let episodes: Vec<NavEpisode> = eps
            .iter()
            .enumerate()
            .map(|(i, (path, goal, geo))| {
                NavEpisode::new(
                    format!("e{i}"),
                    path.iter().map(|&(x, y)| Vec3::new(x, y, 0.0)).collect(),
                    Vec3::new(goal.0, goal.1, 0.0),
                    *geo,
                )
                .unwrap()
            })
            .collect();
        for ep in &episodes {
            let s = if ep.success() { 1.0 } else { 0.0 };
            prop_assert!(ep.spl() <= s);
            if ep.error() == 0.0 {
                prop_assert!(ep.success());
            }
        }
        let r = navigation_metrics(&episodes).unwrap();
        prop_assert!(r.spl <= r.sr + 1e-12);
    }

    #[test]
    fn landmark_choice_ignores_provider_order(
        dets in prop::collection::vec((0usize..4, 0u32..900, 20u32..120, 0u8..4), 0..12),
        heading in -180.0f64..180.0,
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let labels = ["chair", "door", "lamp", "sofa"];
        let detections: Vec<Detection> = dets
            .iter()
            .map(|&(l, x, w, c)| Detection {
                label: labels[l].into(),
                bbox: BBox::new(x as f64, 100.0, (x + w) as f64, 300.0),
                confidence: 0.5 + c as f64 * 0.1,
            })
            .collect();
        let mut shuffled = detections.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let pano = PanoramaGeometry::default();
        let sector = detection_sector(heading);
        let a = best_in_sector(&detections, &sector, &pano).unwrap();
        let b = best_in_sector(&shuffled, &sector, &pano).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn sampling_is_stable_across_calls() {
    let g = common::grid_fixture();
    let opts = SamplingOptions { seed: 1, count: Some(20), ..Default::default() };
    let a = sample_trajectories(&g, &opts).unwrap();
    let b = sample_trajectories(&g, &opts).unwrap();
    assert_eq!(a, b);
    let mut ends = BTreeMap::new();
    for t in &a {
        let p = t.path();
        assert!(ends.insert((p[0].clone(), p[p.len() - 1].clone()), ()).is_none());
    }
}
