// Ground-truth windows on the anticipation grid and their statistics in
// each label space.
//
// cargo run --example dataset_stats

use untrimmed_anticipation::synth::{self, SynthConfig};
use untrimmed_anticipation::{GridConfig, LabelKind, Result, WindowSet};

pub fn run_example() -> Result<u64> {
    let (_, videos) = synth::generate(&SynthConfig {
        videos: 20,
        seed: 11,
        ..Default::default()
    })?;
    let grid = GridConfig::default();
    let mut total = 0;
    for kind in LabelKind::ALL {
        let windows = WindowSet::build(&videos, &grid, kind)?;
        let stats = windows.stats()?;
        total = stats.total_timestamps;
        println!(
            "{kind:>6}: {} timestamps, {:.1}% no action, {:.1}% several actions, {} window items, {} classes seen",
            stats.total_timestamps,
            100.0 * stats.no_action_fraction,
            100.0 * stats.multi_action_fraction,
            stats.gt_instances,
            stats.class_counts.len()
        );
    }

    let windows = WindowSet::build(&videos, &grid, LabelKind::Action)?;
    let w = windows.window(40);
    println!("window at {} t={}:", w.video_id, w.t_a);
    for item in &w.items {
        println!("  class {:>2} starts in {:.2}s", item.class_id, item.tau);
    }
    Ok(total)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
