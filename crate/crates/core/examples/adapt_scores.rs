// Turn per-timestamp class scores from a trimmed anticipation model into
// untrimmed predictions, with one fixed time-to-action or with five
// horizon-specific score sets, and score both.
//
// cargo run --example adapt_scores

use untrimmed_anticipation::adapters::{
    adapt_fixed_tta, adapt_multi_horizon, ScoreFrame, DEFAULT_FIXED_TTA, DEFAULT_HORIZONS, DEFAULT_THRESHOLD,
};
use untrimmed_anticipation::synth::{self, SynthConfig};
use untrimmed_anticipation::{evaluate, EvalConfig, LabelKind, Result, WindowSet};

pub fn run_example() -> Result<(usize, usize)> {
    let (vocab, videos) = synth::generate(&SynthConfig {
        videos: 10,
        seed: 21,
        ..Default::default()
    })?;
    let config = EvalConfig::default();
    let windows = WindowSet::build(&videos, &config.grid, LabelKind::Action)?;
    let classes = vocab.action_count() as usize;

    // Stand-in model: confident about actions starting within `horizon`.
    let frames_for = |horizon: f64| -> Vec<ScoreFrame> {
        windows
            .iter()
            .map(|w| {
                let mut scores = vec![0.02; classes];
                for item in w.items.iter().filter(|i| i.tau <= horizon && i.tau > horizon - 1.0) {
                    scores[item.class_id as usize] = 0.9 - 0.1 * item.tau;
                }
                ScoreFrame {
                    video_id: w.video_id.clone(),
                    t: w.t_a,
                    horizon,
                    scores,
                }
            })
            .collect()
    };

    let fixed = adapt_fixed_tta(&frames_for(DEFAULT_FIXED_TTA), DEFAULT_THRESHOLD, DEFAULT_FIXED_TTA)?;
    let sets: Vec<Vec<ScoreFrame>> = DEFAULT_HORIZONS.iter().map(|&h| frames_for(h)).collect();
    let multi = adapt_multi_horizon(&sets, DEFAULT_THRESHOLD)?;

    for (name, preds) in [("fixed 1s", &fixed), ("five horizons", &multi)] {
        let report = evaluate(&videos, &vocab, preds, &config)?;
        let maps: Vec<String> = report.spaces[0]
            .results
            .iter()
            .map(|r| format!("{}={:.3}", r.delta, r.map.unwrap_or(0.0)))
            .collect();
        println!("{name:>13}: {:>6} predictions, mAP {}", preds.len(), maps.join(" "));
    }
    Ok((fixed.len(), multi.len()))
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
