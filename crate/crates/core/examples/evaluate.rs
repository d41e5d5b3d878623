// Score a noisy predictor with 11-point interpolated mAP at every default
// offset threshold, in the action, verb and noun spaces.
//
// cargo run --example evaluate

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use untrimmed_anticipation::metrics::{evaluate_spaces, EvalOptions};
use untrimmed_anticipation::synth::{self, SynthConfig};
use untrimmed_anticipation::{EvalConfig, LabelKind, Prediction, Result, WindowSet};

pub fn run_example() -> Result<f64> {
    let (vocab, videos) = synth::generate(&SynthConfig {
        videos: 15,
        seed: 5,
        ..Default::default()
    })?;
    let config = EvalConfig::default();
    let windows = WindowSet::build(&videos, &config.grid, LabelKind::Action)?;

    // A model that sees each upcoming action, misjudges when it starts, and
    // sometimes names the wrong class or adds a spurious guess.
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut preds = Vec::new();
    for w in windows.iter() {
        for item in &w.items {
            let class = if rng.random_bool(0.8) {
                item.class_id
            } else {
                rng.random_range(0..vocab.action_count())
            };
            let tta = item.tau + rng.random_range(-0.6..0.6);
            preds.push(Prediction::new(
                w.video_id.clone(),
                w.t_a,
                class,
                tta,
                rng.random_range(0.3..1.0),
            ));
        }
        if rng.random_bool(0.2) {
            let class = rng.random_range(0..vocab.action_count());
            preds.push(Prediction::new(
                w.video_id.clone(),
                w.t_a,
                class,
                2.5,
                rng.random_range(0.0..0.5),
            ));
        }
    }

    let out = evaluate_spaces(
        &videos,
        &vocab,
        &preds,
        &config,
        &LabelKind::ALL,
        EvalOptions::default(),
    )?;
    let report = out.report;
    println!("{}", report.summary());
    let action = report.space(LabelKind::Action).expect("action space scored");
    let worst = action.results[0]
        .classes
        .iter()
        .filter_map(|c| c.ap.map(|ap| (c.class_id, ap, c.gt_count)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    if let Some((class, ap, gt)) = worst {
        println!("hardest action class at the tightest threshold: {class} (AP {ap:.3}, {gt} ground-truth items)");
    }
    Ok(action.results.last().and_then(|r| r.map).unwrap_or(0.0))
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
