//! Brute-force AP oracle for small instances.
//!
//! Everything here is recomputed from the raw annotations with plain loops
//! and does not share code with the windowing, matching or metrics paths.
//! It exists to cross-check [`crate::metrics::evaluate`].

use std::collections::BTreeMap;

use crate::annotations::{LabelKind, VideoRecord};
use crate::error::{Error, Result};
use crate::matching::{Delta, Prediction};

pub const MAX_TIMESTAMPS: usize = 10;
pub const MAX_CLASSES: usize = 5;
pub const MAX_PREDICTIONS: usize = 10;

#[derive(Debug, Clone)]
pub struct SmallInstance {
    pub videos: Vec<VideoRecord>,
    pub predictions: Vec<Prediction>,
    pub alpha: f64,
    pub horizon: f64,
    pub space: LabelKind,
    pub delta: Delta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceResult {
    /// AP of every class with at least one ground-truth instance.
    pub ap: BTreeMap<u32, f64>,
    pub map: Option<f64>,
}

struct Timestamp<'a> {
    video: &'a str,
    t: f64,
    gt: Vec<(u32, f64)>,
}

struct Judged<'a> {
    video: &'a str,
    t: f64,
    class: u32,
    score: f64,
    tp: bool,
    /// Order in which the prediction was considered at its timestamp.
    turn: usize,
}

fn label(a: &crate::annotations::ActionInstance, space: LabelKind) -> u32 {
    match space {
        LabelKind::Action => a.action_class,
        LabelKind::Verb => a.verb_class,
        LabelKind::Noun => a.noun_class,
    }
}

/// `true` when `a` should be considered before `b` at one timestamp.
fn before_locally(a: &Prediction, b: &Prediction) -> bool {
    if a.score != b.score {
        return a.score > b.score;
    }
    if a.tta_hat != b.tta_hat {
        return a.tta_hat < b.tta_hat;
    }
    a.class_id < b.class_id
}

/// `true` when `a` ranks above `b` in the pooled class list.
fn before_globally(a: &Judged<'_>, b: &Judged<'_>) -> bool {
    if a.score != b.score {
        return a.score > b.score;
    }
    if a.video != b.video {
        return a.video < b.video;
    }
    if a.t != b.t {
        return a.t < b.t;
    }
    a.turn < b.turn
}

pub fn reference_ap(inst: &SmallInstance) -> Result<ReferenceResult> {
    if inst.predictions.len() > MAX_PREDICTIONS {
        return Err(Error::Argument(format!(
            "reference oracle refuses {} predictions (limit {MAX_PREDICTIONS})",
            inst.predictions.len()
        )));
    }

    let mut stamps: Vec<Timestamp<'_>> = Vec::new();
    for v in &inst.videos {
        let mut k = 1usize;
        loop {
            let t = k as f64 * inst.alpha;
            if t > v.duration {
                break;
            }
            let mut gt = Vec::new();
            for a in &v.actions {
                let tau = a.start - t;
                if tau > 0.0 && tau <= inst.horizon {
                    gt.push((label(a, inst.space), tau));
                }
            }
            stamps.push(Timestamp {
                video: &v.video_id,
                t,
                gt,
            });
            k += 1;
            if stamps.len() > MAX_TIMESTAMPS {
                return Err(Error::Argument(format!(
                    "reference oracle refuses more than {MAX_TIMESTAMPS} timestamps"
                )));
            }
        }
    }

    let mut classes: Vec<u32> = Vec::new();
    for s in &stamps {
        for &(c, _) in &s.gt {
            if !classes.contains(&c) {
                classes.push(c);
            }
        }
    }
    for p in &inst.predictions {
        if !classes.contains(&p.class_id) {
            classes.push(p.class_id);
        }
    }
    if classes.len() > MAX_CLASSES {
        return Err(Error::Argument(format!(
            "reference oracle refuses {} classes (limit {MAX_CLASSES})",
            classes.len()
        )));
    }

    // Match each timestamp by repeatedly picking the best remaining prediction.
    let mut judged: Vec<Judged<'_>> = Vec::new();
    for s in &stamps {
        let mut pending: Vec<&Prediction> = inst
            .predictions
            .iter()
            .filter(|p| p.video_id == s.video && (p.t_a - s.t).abs() <= 1e-6)
            .collect();
        let mut taken = vec![false; s.gt.len()];
        let mut turn = 0;
        while !pending.is_empty() {
            let mut best = 0;
            for i in 1..pending.len() {
                if before_locally(pending[i], pending[best]) {
                    best = i;
                }
            }
            let p = pending.remove(best);
            let mut nearest: Option<usize> = None;
            for (i, &(c, tau)) in s.gt.iter().enumerate() {
                if c != p.class_id || taken[i] {
                    continue;
                }
                let off = (tau - p.tta_hat).abs();
                match nearest {
                    Some(n) if (s.gt[n].1 - p.tta_hat).abs() <= off => {}
                    _ => nearest = Some(i),
                }
            }
            let tp = match nearest {
                Some(n) => {
                    let off = (s.gt[n].1 - p.tta_hat).abs();
                    let ok = match inst.delta {
                        Delta::Infinite => true,
                        Delta::Finite(d) => off <= d,
                    };
                    if ok {
                        taken[n] = true;
                    }
                    ok
                }
                None => false,
            };
            judged.push(Judged {
                video: s.video,
                t: s.t,
                class: p.class_id,
                score: p.score,
                tp,
                turn,
            });
            turn += 1;
        }
    }
    let placed: usize = judged.len();
    if placed != inst.predictions.len() {
        return Err(Error::Argument("some predictions are not on a grid timestamp".into()));
    }

    classes.sort();
    let mut ap = BTreeMap::new();
    for &class in &classes {
        let gt_count = stamps
            .iter()
            .map(|s| s.gt.iter().filter(|&&(c, _)| c == class).count())
            .sum::<usize>();
        if gt_count == 0 {
            continue;
        }
        // Selection sort into rank order.
        let mut rest: Vec<&Judged<'_>> = judged.iter().filter(|j| j.class == class).collect();
        let mut ranked: Vec<&Judged<'_>> = Vec::new();
        while !rest.is_empty() {
            let mut best = 0;
            for i in 1..rest.len() {
                if before_globally(rest[i], rest[best]) {
                    best = i;
                }
            }
            ranked.push(rest.remove(best));
        }
        let mut total = 0.0;
        for level in 0..=10 {
            let r = level as f64 / 10.0;
            let mut best = 0.0f64;
            for k in 1..=ranked.len() {
                let tp = ranked[..k].iter().filter(|j| j.tp).count();
                let recall = tp as f64 / gt_count as f64;
                let precision = tp as f64 / k as f64;
                if recall >= r && precision > best {
                    best = precision;
                }
            }
            total += best;
        }
        ap.insert(class, total / 11.0);
    }
    let map = if ap.is_empty() {
        None
    } else {
        let mut sum = 0.0;
        for v in ap.values() {
            sum += v;
        }
        Some(sum / ap.len() as f64)
    };
    Ok(ReferenceResult { ap, map })
}
