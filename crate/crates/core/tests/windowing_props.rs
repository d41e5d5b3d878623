use std::collections::BTreeMap;
use std::path::Path;

use proptest::prelude::*;
use untrimmed_anticipation::annotations::{
    read_annotations, write_annotations, ActionInstance, LabelKind, ParseOptions, VideoRecord, Vocabulary,
};
use untrimmed_anticipation::windowing::{build_window, dataset_stats, GridConfig, WindowSet};

const VERBS: u32 = 4;
const NOUNS: u32 = 3;

/// A video on a 1/20 s lattice: `(duration ticks, [(start ticks, length ticks, verb, noun)])`.
fn lattice_video() -> impl Strategy<Value = (u32, Vec<(u32, u32, u32, u32)>)> {
    (20u32..400).prop_flat_map(|dur| {
        let action = (1..dur, 1u32..80, 0..VERBS, 0..NOUNS);
        (Just(dur), prop::collection::vec(action, 0..25))
    })
}

fn to_record(id: &str, dur: u32, actions: &[(u32, u32, u32, u32)], vocab: &Vocabulary) -> VideoRecord {
    let acts = actions
        .iter()
        .map(|&(s, l, v, n)| ActionInstance::new(id, s as f64 / 20.0, (s + l) as f64 / 20.0, v, n, vocab).unwrap())
        .collect();
    VideoRecord::new(id, dur as f64 / 20.0, acts).unwrap()
}

/// `(alpha, horizon)` in ticks; both are exact in binary.
const GRIDS: [(u32, u32); 3] = [(5, 100), (10, 20), (5, 25)];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn windows_match_integer_oracle(video in lattice_video(), grid_pick in 0..GRIDS.len()) {
        let vocab = Vocabulary::new(VERBS, NOUNS).unwrap();
        let (dur, actions) = video;
        let (a_ticks, h_ticks) = GRIDS[grid_pick];
        let grid = GridConfig::new(a_ticks as f64 / 20.0, h_ticks as f64 / 20.0).unwrap();
        let record = to_record("v", dur, &actions, &vocab);
        let set = WindowSet::build(std::slice::from_ref(&record), &grid, LabelKind::Action).unwrap();

        let k_max = dur / a_ticks;
        prop_assert_eq!(set.len(), k_max as usize);
        let mut per_action = vec![0usize; actions.len()];
        for k in 1..=k_max {
            let t = k * a_ticks;
            let mut expected: Vec<(u32, u32)> = actions
                .iter()
                .enumerate()
                .filter(|(_, a)| a.0 > t && a.0 - t <= h_ticks)
                .map(|(i, a)| {
                    per_action[i] += 1;
                    (vocab.encode_action(a.2, a.3), a.0 - t)
                })
                .collect();
            expected.sort_by_key(|&(c, tau)| (tau, c));
            let w = set.window(k as usize - 1);
            prop_assert!((w.t_a - t as f64 / 20.0).abs() < 1e-12);
            let mut got: Vec<(u32, u32)> = w.items.iter().map(|i| (i.class_id, (i.tau * 20.0).round() as u32)).collect();
            got.sort_by_key(|&(c, tau)| (tau, c));
            prop_assert_eq!(&got, &expected);
            for item in &w.items {
                prop_assert!(item.tau > 0.0 && item.tau <= grid.horizon);
            }
            prop_assert_eq!(&w, &build_window(&record, w.t_a, &grid, LabelKind::Action).unwrap());
        }
        // Counting both ways: items over windows equal visits over actions.
        prop_assert_eq!(set.total_items(), per_action.iter().sum::<usize>());
        let stats = set.stats().unwrap();
        prop_assert_eq!(stats.gt_instances as usize, set.total_items());
        prop_assert_eq!(stats.item_histogram.iter().sum::<u64>(), set.len() as u64);
        let windows: Vec<_> = set.iter().collect();
        prop_assert_eq!(&dataset_stats(&windows).unwrap(), &stats);
    }

    #[test]
    fn verb_and_noun_windows_project_actions(video in lattice_video()) {
        let vocab = Vocabulary::new(VERBS, NOUNS).unwrap();
        let (dur, actions) = video;
        let record = to_record("v", dur, &actions, &vocab);
        let grid = GridConfig::default();
        let base = WindowSet::build(std::slice::from_ref(&record), &grid, LabelKind::Action).unwrap();
        for kind in [LabelKind::Verb, LabelKind::Noun] {
            let projected = WindowSet::build(std::slice::from_ref(&record), &grid, kind).unwrap();
            prop_assert_eq!(base.len(), projected.len());
            for w in 0..base.len() {
                let (ac, at) = base.items(w);
                let (pc, pt) = projected.items(w);
                prop_assert_eq!(at, pt);
                let mapped: Vec<u32> = ac.iter().map(|&c| vocab.project_action(c, kind)).collect();
                let mut a: Vec<(u64, u32)> = at.iter().map(|t| t.to_bits()).zip(mapped).collect();
                let mut b: Vec<(u64, u32)> = pt.iter().map(|t| t.to_bits()).zip(pc.iter().copied()).collect();
                a.sort();
                b.sort();
                prop_assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn annotations_round_trip(videos in prop::collection::vec(lattice_video(), 1..4)) {
        let vocab = Vocabulary::new(VERBS, NOUNS).unwrap();
        let records: Vec<VideoRecord> = videos
            .iter()
            .enumerate()
            .map(|(i, (dur, actions))| to_record(&format!("P{i:02}_01"), *dur, actions, &vocab))
            .filter(|r| !r.actions.is_empty())
            .collect();
        let mut buf = Vec::new();
        write_annotations(&records, &mut buf).unwrap();
        let back = read_annotations(buf.as_slice(), Path::new("mem.csv"), &vocab, &ParseOptions::default()).unwrap();
        prop_assert_eq!(back, records);
    }
}

#[test]
fn gt_instances_count_every_timestamp_pair() {
    // One action seen from 20 timestamps counts 20 times.
    let vocab = Vocabulary::new(2, 1).unwrap();
    let a = ActionInstance::new("v", 6.0, 7.0, 1, 0, &vocab).unwrap();
    let v = VideoRecord::new("v", 8.0, vec![a]).unwrap();
    let set = WindowSet::build(&[v], &GridConfig::default(), LabelKind::Verb).unwrap();
    let stats = set.stats().unwrap();
    assert_eq!(stats.gt_instances, 20);
    assert_eq!(stats.class_counts, BTreeMap::from([(1, 20)]));
    assert_eq!(stats.total_timestamps, 32);
    assert_eq!(stats.no_action_fraction, 12.0 / 32.0);
    assert_eq!(stats.multi_action_fraction, 0.0);
}
