//! Greedy matching of ranked predictions to window items by temporal offset.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::windowing::{GroundTruthWindow, WindowItem};

/// Temporal-offset threshold. `Infinite` scores class correctness only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Delta {
    Finite(f64),
    Infinite,
}

impl Delta {
    pub fn finite(seconds: f64) -> Result<Self> {
        if seconds.is_finite() && seconds > 0.0 {
            Ok(Delta::Finite(seconds))
        } else if seconds == f64::INFINITY {
            Ok(Delta::Infinite)
        } else {
            Err(Error::Argument(format!(
                "offset threshold must be positive, got {seconds}"
            )))
        }
    }

    /// Closed threshold: an offset of exactly `delta` is admitted.
    #[inline]
    pub fn admits(self, offset: f64) -> bool {
        match self {
            Delta::Finite(d) => offset <= d,
            Delta::Infinite => true,
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Delta::Finite(d) => d,
            Delta::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Delta::Infinite)
    }
}

impl fmt::Display for Delta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Delta::Finite(d) => write!(f, "{d}"),
            Delta::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Delta {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(Delta::Infinite),
            other => other
                .parse::<f64>()
                .map_err(|_| Error::Argument(format!("invalid offset threshold '{s}'")))
                .and_then(Delta::finite),
        }
    }
}

impl Serialize for Delta {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Delta::Finite(d) => s.serialize_f64(*d),
            Delta::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Delta {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Delta::finite(v),
            Raw::Text(t) => t.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// One predicted future action at an anticipation timestamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub video_id: String,
    #[serde(rename = "t")]
    pub t_a: f64,
    #[serde(rename = "class")]
    pub class_id: u32,
    #[serde(rename = "tta")]
    pub tta_hat: f64,
    pub score: f64,
}

impl Prediction {
    pub fn new(video_id: impl Into<String>, t_a: f64, class_id: u32, tta_hat: f64, score: f64) -> Self {
        Self {
            video_id: video_id.into(),
            t_a,
            class_id,
            tta_hat,
            score,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::Validation(format!(
                "{} @ {}: score {} outside [0, 1]",
                self.video_id, self.t_a, self.score
            )));
        }
        if !self.tta_hat.is_finite() || !self.t_a.is_finite() {
            return Err(Error::Validation(format!(
                "{} @ {}: non-finite time in prediction",
                self.video_id, self.t_a
            )));
        }
        Ok(())
    }
}

/// Ranking order within a timestamp: score descending, then smaller
/// time-to-action, then smaller class id.
#[inline]
pub fn rank_cmp(a_score: f64, a_tta: f64, a_class: u32, b_score: f64, b_tta: f64, b_class: u32) -> Ordering {
    b_score
        .total_cmp(&a_score)
        .then(a_tta.total_cmp(&b_tta))
        .then(a_class.cmp(&b_class))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// Index into the prediction slice passed to [`match_window`].
    pub prediction: usize,
    pub is_tp: bool,
    pub matched_gt: Option<WindowItem>,
    /// Offset to the nearest same-class unmatched item, if any existed.
    pub offset: Option<f64>,
}

#[inline]
pub fn temporal_offset(tau: f64, tta_hat: f64) -> f64 {
    (tau - tta_hat).abs()
}

/// Outcome of one prediction inside [`greedy_match`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Outcome {
    Tp { item: usize, offset: f64 },
    Fp { nearest: Option<f64> },
}

/// Core greedy matcher. `order` lists prediction indices in processing
/// order; `outcomes[p]` receives the result for prediction `p`. `used` is a
/// scratch buffer.
#[allow(clippy::too_many_arguments)]
pub(crate) fn greedy_match(
    item_classes: &[u32],
    item_taus: &[f64],
    pred_classes: &[u32],
    pred_ttas: &[f64],
    order: &[usize],
    delta: Delta,
    used: &mut Vec<bool>,
    outcomes: &mut [Outcome],
) {
    used.clear();
    used.resize(item_classes.len(), false);
    for &p in order {
        let class = pred_classes[p];
        let mut best: Option<(usize, f64)> = None;
        for (i, (&c, &tau)) in item_classes.iter().zip(item_taus).enumerate() {
            if c != class || used[i] {
                continue;
            }
            let off = temporal_offset(tau, pred_ttas[p]);
            if best.is_none_or(|(_, b)| off < b) {
                best = Some((i, off));
            }
        }
        outcomes[p] = match best {
            Some((item, offset)) if delta.admits(offset) => {
                used[item] = true;
                Outcome::Tp { item, offset }
            }
            other => Outcome::Fp {
                nearest: other.map(|(_, o)| o),
            },
        };
    }
}

/// Matches the predictions made at one timestamp against its window.
/// Results are returned in the order of `preds`.
pub fn match_window(window: &GroundTruthWindow, preds: &[Prediction], delta: Delta) -> Result<Vec<MatchResult>> {
    const SAME_TIME: f64 = 1e-6;
    for p in preds {
        if p.video_id != window.video_id || (p.t_a - window.t_a).abs() > SAME_TIME {
            return Err(Error::Argument(format!(
                "prediction at {} @ {} does not belong to window {} @ {}",
                p.video_id, p.t_a, window.video_id, window.t_a
            )));
        }
    }
    let item_classes: Vec<u32> = window.items.iter().map(|i| i.class_id).collect();
    let item_taus: Vec<f64> = window.items.iter().map(|i| i.tau).collect();
    let pred_classes: Vec<u32> = preds.iter().map(|p| p.class_id).collect();
    let pred_ttas: Vec<f64> = preds.iter().map(|p| p.tta_hat).collect();
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| {
        let (a, b) = (&preds[a], &preds[b]);
        rank_cmp(a.score, a.tta_hat, a.class_id, b.score, b.tta_hat, b.class_id)
    });
    let mut outcomes = vec![Outcome::Fp { nearest: None }; preds.len()];
    greedy_match(
        &item_classes,
        &item_taus,
        &pred_classes,
        &pred_ttas,
        &order,
        delta,
        &mut Vec::new(),
        &mut outcomes,
    );
    Ok(outcomes
        .into_iter()
        .enumerate()
        .map(|(prediction, o)| match o {
            Outcome::Tp { item, offset } => MatchResult {
                prediction,
                is_tp: true,
                matched_gt: Some(window.items[item]),
                offset: Some(offset),
            },
            Outcome::Fp { nearest } => MatchResult {
                prediction,
                is_tp: false,
                matched_gt: None,
                offset: nearest,
            },
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(items: &[(u32, f64)]) -> GroundTruthWindow {
        GroundTruthWindow {
            video_id: "v".into(),
            t_a: 1.0,
            items: items
                .iter()
                .map(|&(class_id, tau)| WindowItem { class_id, tau })
                .collect(),
        }
    }

    fn pred(class: u32, tta: f64, score: f64) -> Prediction {
        Prediction::new("v", 1.0, class, tta, score)
    }

    fn labels(r: &[MatchResult]) -> Vec<bool> {
        r.iter().map(|m| m.is_tp).collect()
    }

    #[test]
    fn offset_examples() {
        assert_eq!(temporal_offset(2.0, 1.5), 0.5);
        assert_eq!(temporal_offset(1.0, 1.0), 0.0);
        assert_eq!(temporal_offset(0.5, 3.0), 2.5);
    }

    #[test]
    fn two_actions_three_predictions() {
        let w = window(&[(1, 1.5), (2, 3.0)]);
        let preds = [pred(1, 1.6, 0.9), pred(2, 4.8, 0.8), pred(7, 2.0, 0.7)];
        let r = match_window(&w, &preds, Delta::Finite(0.5)).unwrap();
        assert_eq!(labels(&r), [true, false, false]);
        assert_eq!(r[0].matched_gt, Some(WindowItem { class_id: 1, tau: 1.5 }));
    }

    #[test]
    fn empty_window_all_fp() {
        let r = match_window(&window(&[]), &[pred(1, 1.0, 0.5), pred(2, 1.0, 0.4)], Delta::Infinite).unwrap();
        assert_eq!(labels(&r), [false, false]);
    }

    #[test]
    fn threshold_rule() {
        let w = window(&[(5, 2.0)]);
        let p = [pred(5, 2.4, 0.9)];
        assert_eq!(labels(&match_window(&w, &p, Delta::Finite(0.5)).unwrap()), [true]);
        assert_eq!(labels(&match_window(&w, &p, Delta::Finite(0.25)).unwrap()), [false]);
        let far = [pred(5, 10.0, 0.9)];
        assert_eq!(labels(&match_window(&w, &far, Delta::Infinite).unwrap()), [true]);
    }

    #[test]
    fn exact_threshold_counts() {
        let w = window(&[(5, 2.0)]);
        assert!(match_window(&w, &[pred(5, 2.5, 1.0)], Delta::Finite(0.5)).unwrap()[0].is_tp);
    }

    #[test]
    fn duplicate_on_same_item_is_fp() {
        let w = window(&[(3, 2.0)]);
        let r = match_window(&w, &[pred(3, 2.1, 0.5), pred(3, 2.0, 0.9)], Delta::Finite(1.0)).unwrap();
        assert_eq!(labels(&r), [false, true]);
    }

    #[test]
    fn nearest_unmatched_item_selected() {
        let w = window(&[(3, 1.0), (3, 4.0)]);
        let r = match_window(&w, &[pred(3, 3.0, 0.9), pred(3, 1.2, 0.8)], Delta::Finite(1.0)).unwrap();
        assert_eq!(r[0].matched_gt.unwrap().tau, 4.0);
        assert_eq!(r[1].matched_gt.unwrap().tau, 1.0);
    }

    #[test]
    fn score_ties_prefer_smaller_tta() {
        let w = window(&[(3, 2.0)]);
        let r = match_window(&w, &[pred(3, 2.2, 0.5), pred(3, 1.9, 0.5)], Delta::Infinite).unwrap();
        assert_eq!(labels(&r), [false, true]);
    }

    #[test]
    fn mixed_timestamps_rejected() {
        let w = window(&[]);
        let bad = Prediction::new("v", 1.25, 0, 1.0, 0.5);
        assert!(match_window(&w, &[bad], Delta::Infinite).is_err());
        let other = Prediction::new("u", 1.0, 0, 1.0, 0.5);
        assert!(match_window(&w, &[other], Delta::Infinite).is_err());
    }

    #[test]
    fn delta_parsing() {
        assert_eq!("inf".parse::<Delta>().unwrap(), Delta::Infinite);
        assert_eq!("0.25".parse::<Delta>().unwrap(), Delta::Finite(0.25));
        assert!("0".parse::<Delta>().is_err());
        assert!("-1".parse::<Delta>().is_err());
        let json = serde_json::to_string(&[Delta::Finite(0.5), Delta::Infinite]).unwrap();
        assert_eq!(json, r#"[0.5,"inf"]"#);
        let back: Vec<Delta> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, [Delta::Finite(0.5), Delta::Infinite]);
    }
}
