#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::Rng;
use untrimmed_anticipation::annotations::{ActionInstance, LabelKind, VideoRecord, Vocabulary};
use untrimmed_anticipation::matching::{Delta, Prediction};
use untrimmed_anticipation::reference::SmallInstance;
use untrimmed_anticipation::windowing::{GridConfig, WindowSet};

/// A random instance within the oracle's limits: at most 10 timestamps,
/// 5 classes and 10 predictions. Scores and times come from small sets so
/// that ties are frequent.
pub fn random_instance<R: Rng>(rng: &mut R) -> (Vocabulary, SmallInstance) {
    let vocab = Vocabulary::new(5, 1).unwrap();
    let alpha = *[0.25, 0.5].choose(rng).unwrap();
    let horizon = *[1.0, 2.0, 5.0].choose(rng).unwrap();
    let n_videos = rng.random_range(1..=2);
    let mut budget = 10usize;
    let mut videos = Vec::new();
    for v in 0..n_videos {
        let max_k = if v + 1 == n_videos { budget } else { budget / 2 };
        let k = rng.random_range(1..=max_k.max(1));
        budget -= k;
        // duration anywhere in [k * alpha, (k + 1) * alpha)
        let duration = k as f64 * alpha + rng.random_range(0..5) as f64 * alpha / 5.0;
        let n_actions = rng.random_range(0..=6);
        let actions = (0..n_actions)
            .map(|_| {
                let start = rng.random_range(1..(duration * 20.0) as u32) as f64 / 20.0;
                let class = rng.random_range(0..5);
                ActionInstance::new(format!("vid{v}"), start, start + 0.5, class, 0, &vocab).unwrap()
            })
            .filter(|a| a.start < duration)
            .collect();
        videos.push(VideoRecord::new(format!("vid{v}"), duration, actions).unwrap());
    }
    let grid = GridConfig::new(alpha, horizon).unwrap();
    let windows = WindowSet::build(&videos, &grid, LabelKind::Verb).unwrap();
    let n_preds = rng.random_range(0..=10);
    let mut predictions = Vec::with_capacity(n_preds);
    for _ in 0..n_preds {
        let w = rng.random_range(0..windows.len());
        let (v, _) = windows.position(w);
        let (classes, taus) = windows.items(w);
        let (class, tta) = if !classes.is_empty() && rng.random_bool(0.6) {
            let i = rng.random_range(0..classes.len());
            let jitter = *[0.0, 0.1, -0.2, 0.3, 0.5, 0.6, -1.0, 2.0].choose(rng).unwrap();
            let class = if rng.random_bool(0.8) {
                classes[i]
            } else {
                rng.random_range(0..5)
            };
            (class, taus[i] + jitter)
        } else {
            (rng.random_range(0..5), rng.random_range(0..12) as f64 * 0.25)
        };
        let score = *[0.2, 0.5, 0.5, 0.9, 1.0].choose(rng).unwrap();
        predictions.push(Prediction::new(
            windows.videos()[v].clone(),
            windows.t_a(w),
            class,
            tta,
            score,
        ));
    }
    let delta = *[
        Delta::Finite(0.1),
        Delta::Finite(0.25),
        Delta::Finite(0.5),
        Delta::Finite(1.0),
        Delta::Infinite,
    ]
    .choose(rng)
    .unwrap();
    let inst = SmallInstance {
        videos,
        predictions,
        alpha,
        horizon,
        space: LabelKind::Verb,
        delta,
    };
    (vocab, inst)
}

/// One exact prediction (score 1) for every window item.
pub fn perfect_predictions(windows: &WindowSet) -> Vec<Prediction> {
    let mut out = Vec::new();
    for w in windows.iter() {
        for item in &w.items {
            out.push(Prediction::new(w.video_id.clone(), w.t_a, item.class_id, item.tau, 1.0));
        }
    }
    out
}
