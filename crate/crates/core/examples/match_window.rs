// Greedy matching inside one window: two future actions, three ranked
// predictions, scored at several offset thresholds.
//
// cargo run --example match_window

use untrimmed_anticipation::matching::match_window;
use untrimmed_anticipation::windowing::{GroundTruthWindow, WindowItem};
use untrimmed_anticipation::{Delta, Prediction, Result};

pub fn run_example() -> Result<Vec<bool>> {
    let window = GroundTruthWindow {
        video_id: "kitchen".into(),
        t_a: 1.0,
        items: vec![
            WindowItem { class_id: 1, tau: 1.5 },
            WindowItem { class_id: 2, tau: 3.0 },
        ],
    };
    let preds = [
        Prediction::new("kitchen", 1.0, 1, 1.6, 0.9),
        Prediction::new("kitchen", 1.0, 2, 4.8, 0.8),
        Prediction::new("kitchen", 1.0, 7, 2.0, 0.7),
    ];
    let mut at_half = Vec::new();
    for delta in [
        Delta::Finite(0.05),
        Delta::Finite(0.5),
        Delta::Finite(2.0),
        Delta::Infinite,
    ] {
        let results = match_window(&window, &preds, delta)?;
        let labels: Vec<String> = results
            .iter()
            .map(|m| {
                let tag = if m.is_tp { "TP" } else { "FP" };
                match m.offset {
                    Some(o) => format!("{tag} (class {}, offset {o:.2})", preds[m.prediction].class_id),
                    None => format!("{tag} (class {}, no candidate)", preds[m.prediction].class_id),
                }
            })
            .collect();
        println!("delta {:>4}: {}", delta.to_string(), labels.join(", "));
        if delta == Delta::Finite(0.5) {
            at_half = results.iter().map(|m| m.is_tp).collect();
        }
    }
    Ok(at_half)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
