mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use untrimmed_anticipation::annotations::{ActionInstance, LabelKind, VideoRecord, Vocabulary};
use untrimmed_anticipation::matching::{match_window, Delta, Prediction};
use untrimmed_anticipation::metrics::{
    evaluate, evaluate_spaces, evaluate_with, interpolated_ap, pr_curve, EvalConfig, EvalOptions, ScoredMatch,
    DEFAULT_DELTAS,
};
use untrimmed_anticipation::reference::reference_ap;
use untrimmed_anticipation::synth::{self, SynthConfig};
use untrimmed_anticipation::windowing::{GridConfig, WindowSet};
use untrimmed_anticipation::Error;

fn config_for(inst: &untrimmed_anticipation::reference::SmallInstance, deltas: Vec<Delta>) -> EvalConfig {
    EvalConfig {
        grid: GridConfig::new(inst.alpha, inst.horizon).unwrap(),
        deltas,
        space: inst.space,
        snap: false,
    }
}

#[test]
fn matches_reference_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..1500 {
        let (vocab, inst) = common::random_instance(&mut rng);
        let oracle = reference_ap(&inst).unwrap();
        let report = evaluate(
            &inst.videos,
            &vocab,
            &inst.predictions,
            &config_for(&inst, vec![inst.delta]),
        )
        .unwrap();
        let result = &report.spaces[0].results[0];
        let ours: Vec<(u32, f64)> = result
            .classes
            .iter()
            .filter_map(|c| c.ap.map(|ap| (c.class_id, ap)))
            .collect();
        let theirs: Vec<(u32, f64)> = oracle.ap.iter().map(|(&c, &ap)| (c, ap)).collect();
        assert_eq!(ours.len(), theirs.len(), "case {case}: {inst:?}");
        for ((c1, a1), (c2, a2)) in ours.iter().zip(&theirs) {
            assert_eq!(c1, c2);
            assert!(
                (a1 - a2).abs() <= 1e-12,
                "case {case}: class {c1}: {a1} vs {a2}\n{inst:?}"
            );
        }
        match (result.map, oracle.map) {
            (Some(a), Some(b)) => assert!((a - b).abs() <= 1e-12),
            (None, None) => {}
            other => panic!("case {case}: {other:?}"),
        }
    }
}

fn dataset(seed: u64) -> (Vocabulary, Vec<VideoRecord>) {
    synth::generate(&SynthConfig {
        videos: 6,
        actions_per_video: 25,
        seed,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn perfect_predictor_scores_one() {
    let (vocab, videos) = dataset(1);
    let cfg = EvalConfig::default();
    let windows = WindowSet::build(&videos, &cfg.grid, cfg.space).unwrap();
    let preds = common::perfect_predictions(&windows);
    let report = evaluate(&videos, &vocab, &preds, &cfg).unwrap();
    for r in &report.spaces[0].results {
        assert_eq!(r.map, Some(1.0), "delta {}", r.delta);
    }
}

#[test]
fn empty_predictions_score_zero() {
    let (vocab, videos) = dataset(2);
    let report = evaluate(&videos, &vocab, &[], &EvalConfig::default()).unwrap();
    assert_eq!(report.spaces[0].results.len(), 5);
    for r in &report.spaces[0].results {
        assert_eq!(r.map, Some(0.0));
    }
}

#[test]
fn two_actions_three_predictions_through_evaluate() {
    let vocab = Vocabulary::new(3, 1).unwrap();
    let actions = vec![
        ActionInstance::new("v", 4.5, 5.0, 1, 0, &vocab).unwrap(),
        ActionInstance::new("v", 6.0, 7.0, 2, 0, &vocab).unwrap(),
    ];
    // Timestamps 3 and 6; only the first sees the two actions (tau 1.5 and 3.0).
    let videos = vec![VideoRecord::new("v", 6.5, actions).unwrap()];
    let preds = vec![
        Prediction::new("v", 3.0, 1, 1.6, 0.9),
        Prediction::new("v", 3.0, 2, 4.8, 0.8),
        Prediction::new("v", 3.0, 0, 2.0, 0.7),
    ];
    let cfg = EvalConfig {
        grid: GridConfig::new(3.0, 5.0).unwrap(),
        deltas: vec![Delta::Finite(0.5)],
        space: LabelKind::Verb,
        snap: false,
    };
    let out = evaluate_with(
        &videos,
        &vocab,
        &preds,
        &cfg,
        EvalOptions {
            collect_matches: true,
            keep_curves: false,
        },
    )
    .unwrap();
    let labels: Vec<(u32, bool)> = out.matches.iter().map(|m| (m.class, m.is_tp)).collect();
    assert_eq!(labels, [(1, true), (2, false), (0, false)]);
    let classes = &out.report.spaces[0].results[0].classes;
    let ap = |c: u32| classes.iter().find(|x| x.class_id == c).unwrap().ap;
    assert_eq!(ap(1), Some(1.0));
    assert_eq!(ap(2), Some(0.0));
    assert_eq!(ap(0), None);
    assert_eq!(out.report.spaces[0].results[0].map, Some(0.5));
}

#[test]
fn curve_matches_public_pr_curve() {
    let (vocab, videos) = dataset(3);
    let cfg = EvalConfig {
        deltas: vec![Delta::Finite(0.5)],
        ..Default::default()
    };
    let windows = WindowSet::build(&videos, &cfg.grid, cfg.space).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut preds = common::perfect_predictions(&windows);
    for p in &mut preds {
        p.tta_hat += rng.random_range(-1.0..1.0);
        p.score = (rng.random_range(0..4) as f64) / 4.0;
        if rng.random_bool(0.3) {
            p.class_id = rng.random_range(0..vocab.action_count());
        }
    }
    let out = evaluate_with(
        &videos,
        &vocab,
        &preds,
        &cfg,
        EvalOptions {
            collect_matches: true,
            keep_curves: true,
        },
    )
    .unwrap();
    let scored: Vec<ScoredMatch<'_>> = out
        .matches
        .iter()
        .map(|m| ScoredMatch {
            video_id: &m.video_id,
            t_a: m.t,
            class_id: m.class,
            score: m.score,
            turn: m.turn,
            is_tp: m.is_tp,
        })
        .collect();
    for (_, _, curve) in &out.curves {
        let again = pr_curve(curve.class_id, &scored, curve.gt_count);
        assert_eq!(&again, curve);
        let class = out.report.spaces[0].results[0]
            .classes
            .iter()
            .find(|c| c.class_id == curve.class_id)
            .unwrap();
        if let Some(ap) = class.ap {
            assert_eq!(ap, interpolated_ap(curve));
        }
    }
}

#[test]
fn input_order_does_not_matter() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..200 {
        let (vocab, inst) = common::random_instance(&mut rng);
        let cfg = config_for(&inst, DEFAULT_DELTAS.to_vec());
        let a = evaluate(&inst.videos, &vocab, &inst.predictions, &cfg).unwrap();
        let mut shuffled = inst.predictions.clone();
        shuffled.reverse();
        let mut videos = inst.videos.clone();
        videos.reverse();
        let b = evaluate(&videos, &vocab, &shuffled, &cfg).unwrap();
        assert_eq!(a.spaces, b.spaces);
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let (vocab, videos) = dataset(4);
    let cfg = EvalConfig::default();
    let windows = WindowSet::build(&videos, &cfg.grid, cfg.space).unwrap();
    let mut preds = common::perfect_predictions(&windows);
    for (i, p) in preds.iter_mut().enumerate() {
        p.tta_hat += (i % 7) as f64 * 0.2 - 0.6;
        p.score = ((i * 31) % 10) as f64 / 10.0;
    }
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| evaluate(&videos, &vocab, &preds, &cfg).unwrap())
    };
    assert_eq!(run(1).spaces, run(4).spaces);
}

#[test]
fn verb_and_noun_projection() {
    let (vocab, videos) = dataset(6);
    let grid = GridConfig::default();
    let windows = WindowSet::build(&videos, &grid, LabelKind::Action).unwrap();
    let preds = common::perfect_predictions(&windows);
    let out = evaluate_spaces(
        &videos,
        &vocab,
        &preds,
        &EvalConfig::default(),
        &LabelKind::ALL,
        EvalOptions::default(),
    )
    .unwrap();
    assert_eq!(out.report.spaces.len(), 3);
    for s in &out.report.spaces {
        assert_eq!(s.class_count, vocab.class_count(s.space));
        for r in &s.results {
            assert_eq!(r.map, Some(1.0), "{} @ {}", s.space, r.delta);
        }
    }
}

#[test]
fn rejects_bad_predictions() {
    let (vocab, videos) = dataset(7);
    let cfg = EvalConfig::default();
    let v = videos[0].video_id.clone();
    let cases = [
        Prediction::new("nope", 0.25, 0, 1.0, 0.5),
        Prediction::new(v.clone(), 0.3, 0, 1.0, 0.5),
        Prediction::new(v.clone(), 0.25, 999, 1.0, 0.5),
        Prediction::new(v.clone(), 0.25, 0, 1.0, 1.5),
        Prediction::new(v.clone(), 1e6, 0, 1.0, 0.5),
    ];
    for p in cases {
        let err = evaluate(&videos, &vocab, std::slice::from_ref(&p), &cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{p:?}: {err}");
    }
    assert!(matches!(
        evaluate(
            &videos,
            &vocab,
            &[Prediction::new(v.clone(), 0.25, 999, 1.0, 0.5)],
            &cfg
        ),
        Err(Error::Vocabulary { .. })
    ));
    let snapped = EvalConfig { snap: true, ..cfg };
    assert!(evaluate(&videos, &vocab, &[Prediction::new(v, 0.3, 0, 1.0, 0.5)], &snapped).is_ok());
}

fn small_instance() -> impl Strategy<Value = (Vocabulary, untrimmed_anticipation::reference::SmallInstance)> {
    any::<u64>().prop_map(|seed| common::random_instance(&mut ChaCha8Rng::seed_from_u64(seed)))
}

fn aps(report: &untrimmed_anticipation::EvalReport, d: usize) -> Vec<(u32, Option<f64>)> {
    report.spaces[0].results[d]
        .classes
        .iter()
        .map(|c| (c.class_id, c.ap))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn infinite_delta_ignores_time_estimates((vocab, inst) in small_instance(), noise in prop::collection::vec(-10.0f64..10.0, 10)) {
        let cfg = config_for(&inst, vec![Delta::Infinite]);
        let a = evaluate(&inst.videos, &vocab, &inst.predictions, &cfg).unwrap();
        let mut moved = inst.predictions.clone();
        for (p, z) in moved.iter_mut().zip(&noise) {
            p.tta_hat = *z;
        }
        let b = evaluate(&inst.videos, &vocab, &moved, &cfg).unwrap();
        prop_assert_eq!(aps(&a, 0), aps(&b, 0));
    }

    #[test]
    fn tp_count_monotone_in_delta((vocab, inst) in small_instance()) {
        let windows = WindowSet::build(&inst.videos, &GridConfig::new(inst.alpha, inst.horizon).unwrap(), inst.space).unwrap();
        let _ = vocab;
        for w in windows.iter() {
            let preds: Vec<Prediction> = inst.predictions.iter()
                .filter(|p| p.video_id == w.video_id && (p.t_a - w.t_a).abs() < 1e-9)
                .cloned()
                .collect();
            let mut last = 0;
            for d in [0.05, 0.1, 0.25, 0.5, 0.75, 1.0, 2.0, f64::INFINITY] {
                let tp = match_window(&w, &preds, Delta::finite(d).unwrap()).unwrap().iter().filter(|m| m.is_tp).count();
                prop_assert!(tp >= last, "TP count fell from {} to {} at delta {}", last, tp, d);
                prop_assert!(tp <= w.items.len().min(preds.len()));
                last = tp;
            }
        }
    }

    #[test]
    fn removing_a_false_positive_never_lowers_ap((vocab, inst) in small_instance(), pick in any::<prop::sample::Index>()) {
        let cfg = config_for(&inst, vec![inst.delta]);
        let out = evaluate_with(&inst.videos, &vocab, &inst.predictions, &cfg, EvalOptions { collect_matches: true, keep_curves: false }).unwrap();
        let fps: Vec<&untrimmed_anticipation::metrics::MatchRecord> = out.matches.iter().filter(|m| !m.is_tp).collect();
        prop_assume!(!fps.is_empty());
        let fp = fps[pick.index(fps.len())];
        let idx = inst.predictions.iter().position(|p| {
            p.video_id == fp.video_id && (p.t_a - fp.t).abs() < 1e-9 && p.class_id == fp.class && p.tta_hat == fp.tta && p.score == fp.score
        }).unwrap();
        let mut fewer = inst.predictions.clone();
        fewer.remove(idx);
        let after = evaluate(&inst.videos, &vocab, &fewer, &cfg).unwrap();
        let now: std::collections::BTreeMap<u32, Option<f64>> = aps(&after, 0).into_iter().collect();
        for (c, before) in aps(&out.report, 0) {
            if let (Some(b), Some(Some(n))) = (before, now.get(&c)) {
                prop_assert!(*n >= b, "class {}: {} -> {}", c, b, n);
            }
        }
    }

    #[test]
    fn duplicating_a_sole_match_never_raises_ap((vocab, inst) in small_instance(), pick in any::<prop::sample::Index>(), lower in any::<bool>()) {
        let grid = GridConfig::new(inst.alpha, inst.horizon).unwrap();
        let cfg = config_for(&inst, vec![inst.delta]);
        let out = evaluate_with(&inst.videos, &vocab, &inst.predictions, &cfg, EvalOptions { collect_matches: true, keep_curves: false }).unwrap();
        let windows = WindowSet::build(&inst.videos, &grid, inst.space).unwrap();
        // TPs whose class occurs once in their window: a copy cannot match anything.
        let sole: Vec<&untrimmed_anticipation::metrics::MatchRecord> = out.matches.iter().filter(|m| {
            m.is_tp && {
                let v = windows.video_index(&m.video_id).unwrap();
                let w = windows.locate(v, grid.index_of(m.t, false).unwrap()).unwrap();
                windows.items(w).0.iter().filter(|&&c| c == m.class).count() == 1
            }
        }).collect();
        prop_assume!(!sole.is_empty());
        let m = sole[pick.index(sole.len())];
        let score = if lower { m.score * 0.5 } else { m.score };
        let mut more = inst.predictions.clone();
        more.push(Prediction::new(m.video_id.clone(), m.t, m.class, m.tta, score));
        let after = evaluate(&inst.videos, &vocab, &more, &cfg).unwrap();
        let now: std::collections::BTreeMap<u32, Option<f64>> = aps(&after, 0).into_iter().collect();
        for (c, before) in aps(&out.report, 0) {
            if let (Some(b), Some(Some(n))) = (before, now.get(&c)) {
                prop_assert!(*n <= b, "class {}: {} -> {}", c, b, n);
            }
        }
    }

    #[test]
    fn map_non_decreasing_in_delta((vocab, inst) in small_instance()) {
        let deltas: Vec<Delta> = [0.05, 0.1, 0.25, 0.5, 0.75, 1.0, 2.0]
            .iter()
            .map(|&d| Delta::Finite(d))
            .chain([Delta::Infinite])
            .collect();
        let report = evaluate(&inst.videos, &vocab, &inst.predictions, &config_for(&inst, deltas)).unwrap();
        let maps: Vec<f64> = report.spaces[0].results.iter().map(|r| r.map.unwrap_or(0.0)).collect();
        for w in maps.windows(2) {
            prop_assert!(w[1] >= w[0], "{:?}", maps);
        }
    }

    #[test]
    fn map_within_unit_interval((vocab, inst) in small_instance()) {
        let report = evaluate(&inst.videos, &vocab, &inst.predictions, &config_for(&inst, DEFAULT_DELTAS.to_vec())).unwrap();
        for r in &report.spaces[0].results {
            if let Some(m) = r.map {
                prop_assert!((0.0..=1.0).contains(&m));
            }
            for c in &r.classes {
                if let Some(ap) = c.ap {
                    prop_assert!((0.0..=1.0).contains(&ap));
                }
            }
        }
    }
}
