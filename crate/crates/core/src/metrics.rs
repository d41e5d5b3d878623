//! Precision-recall curves, 11-point interpolated AP and mAP over offset
//! thresholds.
//!
//! Predictions are pooled per class across every timestamp and video and
//! ranked by score (descending), then video id, timestamp and the order in
//! which their window matched them. Predicted times never enter the pooled
//! ranking, so at an infinite threshold AP ignores them entirely. Each
//! (timestamp, window item) pair counts as one ground-truth instance.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotations::{LabelKind, VideoRecord, Vocabulary};
use crate::error::{Error, Result};
use crate::matching::{greedy_match, rank_cmp, Delta, Outcome, Prediction};
use crate::windowing::{GridConfig, WindowSet};

pub const SCHEMA_VERSION: u32 = 1;

pub const DEFAULT_DELTAS: [Delta; 5] = [
    Delta::Finite(0.25),
    Delta::Finite(0.5),
    Delta::Finite(0.75),
    Delta::Finite(1.0),
    Delta::Infinite,
];

/// Recall level `j` of the 11-point rule, `j / 10`.
#[inline]
pub fn recall_level(j: usize) -> f64 {
    j as f64 / 10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub grid: GridConfig,
    pub deltas: Vec<Delta>,
    pub space: LabelKind,
    /// Snap off-grid prediction timestamps to the nearest grid point instead
    /// of rejecting them.
    #[serde(default)]
    pub snap: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            deltas: DEFAULT_DELTAS.to_vec(),
            space: LabelKind::Action,
            snap: false,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.deltas.is_empty() {
            return Err(Error::Argument("at least one offset threshold is required".into()));
        }
        for d in &self.deltas {
            if let Delta::Finite(v) = d {
                Delta::finite(*v)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

/// Rank-based precision/recall of one class; `points[k]` is rank `k + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub class_id: u32,
    pub gt_count: u64,
    pub points: Vec<PrPoint>,
}

impl PrCurve {
    /// Builds the curve from TP flags listed in rank order.
    pub fn from_flags(class_id: u32, gt_count: u64, flags: impl IntoIterator<Item = bool>) -> Self {
        let mut tp = 0u64;
        let points = flags
            .into_iter()
            .enumerate()
            .map(|(k, is_tp)| {
                tp += is_tp as u64;
                PrPoint {
                    recall: if gt_count == 0 {
                        0.0
                    } else {
                        tp as f64 / gt_count as f64
                    },
                    precision: tp as f64 / (k + 1) as f64,
                }
            })
            .collect();
        Self {
            class_id,
            gt_count,
            points,
        }
    }

    pub fn has_gt(&self) -> bool {
        self.gt_count > 0
    }
}

/// A matched prediction as seen by the global per-class ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredMatch<'a> {
    pub video_id: &'a str,
    pub t_a: f64,
    pub class_id: u32,
    pub score: f64,
    /// Position in its window's matching order.
    pub turn: u32,
    pub is_tp: bool,
}

fn global_cmp(a: &ScoredMatch<'_>, b: &ScoredMatch<'_>) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.video_id.cmp(b.video_id))
        .then(a.t_a.total_cmp(&b.t_a))
        .then(a.turn.cmp(&b.turn))
}

/// PR curve of `class_id` from pooled match results.
pub fn pr_curve(class_id: u32, matches: &[ScoredMatch<'_>], gt_count: u64) -> PrCurve {
    let mut ranked: Vec<&ScoredMatch<'_>> = matches.iter().filter(|m| m.class_id == class_id).collect();
    ranked.sort_by(|a, b| global_cmp(a, b));
    PrCurve::from_flags(class_id, gt_count, ranked.into_iter().map(|m| m.is_tp))
}

/// Running maxima for the 11-point interpolation.
#[derive(Debug, Clone, Default)]
struct Interpolator {
    /// `best[j]`: highest precision among ranks whose recall reaches level
    /// `j` but not level `j + 1`.
    best: [f64; 11],
}

impl Interpolator {
    #[inline]
    fn push(&mut self, recall: f64, precision: f64) {
        let mut j = ((recall * 10.0).floor().max(0.0) as usize).min(10);
        while j < 10 && recall_level(j + 1) <= recall {
            j += 1;
        }
        while j > 0 && recall_level(j) > recall {
            j -= 1;
        }
        if recall >= recall_level(j) && precision > self.best[j] {
            self.best[j] = precision;
        }
    }

    fn finish(self) -> f64 {
        let mut interp = [0.0f64; 11];
        let mut running = 0.0f64;
        for j in (0..11).rev() {
            running = running.max(self.best[j]);
            interp[j] = running;
        }
        let mut sum = 0.0;
        for p in interp {
            sum += p;
        }
        sum / 11.0
    }
}

/// 11-point interpolated AP: mean over recall levels 0.0, 0.1, ..., 1.0 of
/// the best precision at any rank whose recall is at least that level.
pub fn interpolated_ap(curve: &PrCurve) -> f64 {
    let mut interp = Interpolator::default();
    for p in &curve.points {
        interp.push(p.recall, p.precision);
    }
    interp.finish()
}

fn ap_from_flags(gt_count: u64, flags: impl Iterator<Item = bool>) -> (f64, u64) {
    let mut interp = Interpolator::default();
    let mut tp = 0u64;
    for (k, is_tp) in flags.enumerate() {
        tp += is_tp as u64;
        interp.push(tp as f64 / gt_count as f64, tp as f64 / (k + 1) as f64);
    }
    (interp.finish(), tp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassResult {
    pub class_id: u32,
    pub gt_count: u64,
    pub predictions: u64,
    pub true_positives: u64,
    /// `None` when the class has no ground truth.
    pub ap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaResult {
    pub delta: Delta,
    /// Mean AP over classes with ground truth; `None` if there are none.
    pub map: Option<f64>,
    pub classes: Vec<ClassResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceReport {
    pub space: LabelKind,
    pub class_count: u32,
    pub classes_with_gt: u32,
    pub results: Vec<DeltaResult>,
}

impl SpaceReport {
    pub fn map(&self, delta: Delta) -> Option<f64> {
        self.results.iter().find(|r| r.delta == delta).and_then(|r| r.map)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSettings {
    pub alpha: f64,
    pub horizon: f64,
    pub deltas: Vec<Delta>,
    pub snap: bool,
    pub grid_start: String,
    pub window_rule: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportCounts {
    pub videos: u64,
    pub timestamps: u64,
    pub gt_instances: u64,
    pub predictions: u64,
    pub inferred_durations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub settings: ReportSettings,
    pub counts: ReportCounts,
    pub spaces: Vec<SpaceReport>,
    pub timing_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictions_manifest: Option<serde_json::Value>,
}

impl EvalReport {
    pub fn space(&self, kind: LabelKind) -> Option<&SpaceReport> {
        self.spaces.iter().find(|s| s.space == kind)
    }

    /// mAP table rounded to 4 decimals, one row per label space.
    pub fn summary(&self) -> String {
        let mut out = String::from("space");
        for d in &self.settings.deltas {
            out.push_str(&format!("\tmAP@{d}"));
        }
        out.push('\n');
        for s in &self.spaces {
            out.push_str(s.space.as_str());
            for r in &s.results {
                match r.map {
                    Some(m) => out.push_str(&format!("\t{m:.4}")),
                    None => out.push_str("\t-"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Per-prediction diagnostics for one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub space: LabelKind,
    pub delta: Delta,
    pub video_id: String,
    pub t: f64,
    pub class: u32,
    pub tta: f64,
    pub score: f64,
    /// Position in its window's matching order.
    pub turn: u32,
    pub is_tp: bool,
    pub matched_tau: Option<f64>,
    pub offset: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EvalOptions {
    pub collect_matches: bool,
    pub keep_curves: bool,
}

#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub report: EvalReport,
    pub matches: Vec<MatchRecord>,
    /// `(space, delta index, curve)` when curves were requested.
    pub curves: Vec<(LabelKind, usize, PrCurve)>,
}

/// Evaluates predictions in `config.space` against the annotations.
pub fn evaluate(
    videos: &[VideoRecord],
    vocab: &Vocabulary,
    preds: &[Prediction],
    config: &EvalConfig,
) -> Result<EvalReport> {
    evaluate_with(videos, vocab, preds, config, EvalOptions::default()).map(|o| o.report)
}

pub fn evaluate_with(
    videos: &[VideoRecord],
    vocab: &Vocabulary,
    preds: &[Prediction],
    config: &EvalConfig,
    opts: EvalOptions,
) -> Result<EvalOutput> {
    let started = Instant::now();
    config.validate()?;
    let windows = WindowSet::build(videos, &config.grid, config.space)?;
    let resolved = resolve(&windows, vocab, config, preds)?;
    let (space, matches, curves) = evaluate_space(&windows, vocab, &resolved, preds, config, opts);
    let report = assemble(config, &windows, preds.len(), vec![space], started);
    Ok(EvalOutput {
        report,
        matches,
        curves,
    })
}

/// Evaluates action-space predictions in several label spaces at once,
/// projecting predicted action classes onto verbs and nouns.
pub fn evaluate_spaces(
    videos: &[VideoRecord],
    vocab: &Vocabulary,
    action_preds: &[Prediction],
    config: &EvalConfig,
    spaces: &[LabelKind],
    opts: EvalOptions,
) -> Result<EvalOutput> {
    let started = Instant::now();
    config.validate()?;
    if spaces.is_empty() {
        return Err(Error::Argument("no label space requested".into()));
    }
    let action_space = vocab.space(LabelKind::Action);
    for p in action_preds {
        action_space.check(p.class_id)?;
    }
    let mut reports = Vec::with_capacity(spaces.len());
    let mut matches = Vec::new();
    let mut curves = Vec::new();
    let mut last_windows = None;
    for &kind in spaces {
        let cfg = EvalConfig {
            space: kind,
            ..config.clone()
        };
        let projected: Vec<Prediction>;
        let preds = if kind == LabelKind::Action {
            action_preds
        } else {
            projected = project_predictions(action_preds, vocab, kind);
            &projected
        };
        let windows = WindowSet::build(videos, &cfg.grid, kind)?;
        let resolved = resolve(&windows, vocab, &cfg, preds)?;
        let (space, m, c) = evaluate_space(&windows, vocab, &resolved, preds, &cfg, opts);
        reports.push(space);
        matches.extend(m);
        curves.extend(c);
        last_windows = Some(windows);
    }
    let windows = last_windows.expect("at least one space");
    let report = assemble(config, &windows, action_preds.len(), reports, started);
    Ok(EvalOutput {
        report,
        matches,
        curves,
    })
}

/// Maps action-class predictions onto `kind`.
pub fn project_predictions(preds: &[Prediction], vocab: &Vocabulary, kind: LabelKind) -> Vec<Prediction> {
    preds
        .iter()
        .map(|p| Prediction {
            class_id: vocab.project_action(p.class_id, kind),
            ..p.clone()
        })
        .collect()
}

fn assemble(
    config: &EvalConfig,
    windows: &WindowSet,
    predictions: usize,
    spaces: Vec<SpaceReport>,
    started: Instant,
) -> EvalReport {
    EvalReport {
        schema_version: SCHEMA_VERSION,
        tool_version: crate::VERSION.to_string(),
        settings: ReportSettings {
            alpha: config.grid.alpha,
            horizon: config.grid.horizon,
            deltas: config.deltas.clone(),
            snap: config.snap,
            grid_start: "first timestamp at alpha".into(),
            window_rule: "0 < start - t <= horizon".into(),
        },
        counts: ReportCounts {
            videos: windows.videos().len() as u64,
            timestamps: windows.len() as u64,
            gt_instances: windows.total_items() as u64,
            predictions: predictions as u64,
            inferred_durations: windows.inferred_durations() as u64,
        },
        spaces,
        timing_ms: started.elapsed().as_secs_f64() * 1e3,
        manifest: None,
        predictions_manifest: None,
    }
}

/// Predictions flattened into columns and attached to windows.
struct Resolved {
    window: Vec<u32>,
    class: Vec<u32>,
    tta: Vec<f64>,
    score: Vec<f64>,
}

fn resolve(windows: &WindowSet, vocab: &Vocabulary, config: &EvalConfig, preds: &[Prediction]) -> Result<Resolved> {
    let space = vocab.space(config.space);
    let n = preds.len();
    let mut r = Resolved {
        window: Vec::with_capacity(n),
        class: Vec::with_capacity(n),
        tta: Vec::with_capacity(n),
        score: Vec::with_capacity(n),
    };
    let mut last: Option<(&str, usize)> = None;
    for p in preds {
        p.validate()?;
        space.check(p.class_id)?;
        let v = match last {
            Some((id, v)) if id == p.video_id => v,
            _ => {
                let v = windows
                    .video_index(&p.video_id)
                    .ok_or_else(|| Error::Validation(format!("prediction for unknown video '{}'", p.video_id)))?;
                last = Some((&p.video_id, v));
                v
            }
        };
        let k = config.grid.index_of(p.t_a, config.snap).ok_or_else(|| {
            Error::Validation(format!(
                "{} @ {}: timestamp is not on the {}s grid (use snapping to round it)",
                p.video_id, p.t_a, config.grid.alpha
            ))
        })?;
        let w = windows.locate(v, k).ok_or_else(|| {
            Error::Validation(format!(
                "{} @ {}: timestamp outside the video's {} grid points",
                p.video_id,
                p.t_a,
                windows.window_count(v)
            ))
        })?;
        r.window.push(w as u32);
        r.class.push(p.class_id);
        r.tta.push(p.tta_hat);
        r.score.push(p.score);
    }
    Ok(r)
}

type SpaceOutput = (SpaceReport, Vec<MatchRecord>, Vec<(LabelKind, usize, PrCurve)>);

fn evaluate_space(
    windows: &WindowSet,
    vocab: &Vocabulary,
    r: &Resolved,
    preds: &[Prediction],
    config: &EvalConfig,
    opts: EvalOptions,
) -> SpaceOutput {
    let n = r.window.len();
    let deltas = &config.deltas;

    // Window-major processing order; inside a window, the matching rank.
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.par_sort_unstable_by(|&a, &b| {
        let (a, b) = (a as usize, b as usize);
        r.window[a]
            .cmp(&r.window[b])
            .then_with(|| rank_cmp(r.score[a], r.tta[a], r.class[a], r.score[b], r.tta[b], r.class[b]))
            .then(a.cmp(&b))
    });
    let mut group_starts: Vec<usize> = Vec::new();
    for (pos, &p) in order.iter().enumerate() {
        if pos == 0 || r.window[p as usize] != r.window[order[pos - 1] as usize] {
            group_starts.push(pos);
        }
    }
    group_starts.push(n);

    // Chunks of whole windows, matched in parallel. `outcomes[d][pos]`.
    let chunk_groups = (group_starts.len() / (rayon::current_num_threads() * 8)).max(1024);
    let chunk_bounds: Vec<(usize, usize)> = (0..group_starts.len().saturating_sub(1))
        .step_by(chunk_groups)
        .map(|g| (g, (g + chunk_groups).min(group_starts.len() - 1)))
        .collect();
    let per_chunk: Vec<Vec<Vec<Outcome>>> = chunk_bounds
        .par_iter()
        .map(|&(g0, g1)| {
            let (p0, p1) = (group_starts[g0], group_starts[g1]);
            let mut out = vec![vec![Outcome::Fp { nearest: None }; p1 - p0]; deltas.len()];
            let mut used = Vec::new();
            let mut local_class = Vec::new();
            let mut local_tta = Vec::new();
            let mut local_order = Vec::new();
            let mut local_out = Vec::new();
            for g in g0..g1 {
                let (s, e) = (group_starts[g], group_starts[g + 1]);
                let w = r.window[order[s] as usize] as usize;
                let (item_classes, item_taus) = windows.items(w);
                local_class.clear();
                local_tta.clear();
                for &p in &order[s..e] {
                    local_class.push(r.class[p as usize]);
                    local_tta.push(r.tta[p as usize]);
                }
                local_order.clear();
                local_order.extend(0..e - s);
                for (d, &delta) in deltas.iter().enumerate() {
                    local_out.clear();
                    local_out.resize(e - s, Outcome::Fp { nearest: None });
                    greedy_match(
                        item_classes,
                        item_taus,
                        &local_class,
                        &local_tta,
                        &local_order,
                        delta,
                        &mut used,
                        &mut local_out,
                    );
                    out[d][s - p0..e - p0].copy_from_slice(&local_out);
                }
            }
            out
        })
        .collect();
    let mut outcomes: Vec<Vec<Outcome>> = vec![Vec::with_capacity(n); deltas.len()];
    for chunk in per_chunk {
        for (d, part) in chunk.into_iter().enumerate() {
            outcomes[d].extend(part);
        }
    }
    let is_tp = |d: usize, pos: usize| matches!(outcomes[d][pos], Outcome::Tp { .. });

    // Global per-class ranking over processing positions.
    let mut video_rank = vec![0u32; windows.videos().len()];
    {
        let mut names: Vec<(usize, &String)> = windows.videos().iter().enumerate().collect();
        names.sort_by(|a, b| a.1.cmp(b.1));
        for (rank, (v, _)) in names.into_iter().enumerate() {
            video_rank[v] = rank as u32;
        }
    }
    let pos_key = |pos: usize| {
        let p = order[pos] as usize;
        let (v, k) = windows.position(r.window[p] as usize);
        (r.class[p], r.score[p], video_rank[v], k)
    };
    let mut ranked: Vec<u32> = (0..n as u32).collect();
    ranked.par_sort_unstable_by(|&a, &b| {
        let (ka, kb) = (pos_key(a as usize), pos_key(b as usize));
        ka.0.cmp(&kb.0)
            .then(kb.1.total_cmp(&ka.1))
            .then(ka.2.cmp(&kb.2))
            .then(ka.3.cmp(&kb.3))
            .then(a.cmp(&b))
    });

    let space = vocab.space(config.space);
    let mut gt_counts: BTreeMap<u32, u64> = BTreeMap::new();
    for &c in windows.item_classes() {
        *gt_counts.entry(c).or_default() += 1;
    }
    let mut class_ranges: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    let mut start = 0;
    while start < n {
        let class = r.class[order[ranked[start] as usize] as usize];
        let mut end = start + 1;
        while end < n && r.class[order[ranked[end] as usize] as usize] == class {
            end += 1;
        }
        class_ranges.insert(class, (start, end));
        start = end;
    }
    let mut classes: Vec<u32> = gt_counts.keys().chain(class_ranges.keys()).copied().collect();
    classes.sort_unstable();
    classes.dedup();

    let per_class: Vec<Vec<(ClassResult, Option<PrCurve>)>> = classes
        .par_iter()
        .map(|&class| {
            let gt = gt_counts.get(&class).copied().unwrap_or(0);
            let (s, e) = class_ranges.get(&class).copied().unwrap_or((0, 0));
            let positions = &ranked[s..e];
            (0..deltas.len())
                .map(|d| {
                    let flags = positions.iter().map(|&pos| is_tp(d, pos as usize));
                    let (ap, tp) = if gt > 0 {
                        let (ap, tp) = ap_from_flags(gt, flags.clone());
                        (Some(ap), tp)
                    } else {
                        (None, 0)
                    };
                    let curve = opts.keep_curves.then(|| PrCurve::from_flags(class, gt, flags));
                    (
                        ClassResult {
                            class_id: class,
                            gt_count: gt,
                            predictions: (e - s) as u64,
                            true_positives: tp,
                            ap,
                        },
                        curve,
                    )
                })
                .collect()
        })
        .collect();

    let mut results: Vec<DeltaResult> = deltas
        .iter()
        .map(|&delta| DeltaResult {
            delta,
            map: None,
            classes: Vec::with_capacity(classes.len()),
        })
        .collect();
    let mut curves = Vec::new();
    for per_delta in per_class {
        for (d, (cr, curve)) in per_delta.into_iter().enumerate() {
            results[d].classes.push(cr);
            if let Some(c) = curve {
                curves.push((config.space, d, c));
            }
        }
    }
    for res in &mut results {
        let mut sum = 0.0;
        let mut count = 0u32;
        for c in &res.classes {
            if let Some(ap) = c.ap {
                sum += ap;
                count += 1;
            }
        }
        res.map = (count > 0).then(|| sum / count as f64);
    }

    let mut matches = Vec::new();
    if opts.collect_matches {
        for (d, &delta) in deltas.iter().enumerate() {
            let mut turn = 0u32;
            for (pos, &p) in order.iter().enumerate() {
                let p = p as usize;
                let w = r.window[p] as usize;
                if pos > 0 && r.window[order[pos - 1] as usize] as usize != w {
                    turn = 0;
                }
                let (_, taus) = windows.items(w);
                let (is_tp, matched_tau, offset) = match outcomes[d][pos] {
                    Outcome::Tp { item, offset } => (true, Some(taus[item]), Some(offset)),
                    Outcome::Fp { nearest } => (false, None, nearest),
                };
                matches.push(MatchRecord {
                    space: config.space,
                    delta,
                    video_id: preds[p].video_id.clone(),
                    t: windows.t_a(w),
                    class: r.class[p],
                    tta: r.tta[p],
                    score: r.score[p],
                    turn,
                    is_tp,
                    matched_tau,
                    offset,
                });
                turn += 1;
            }
        }
    }

    let report = SpaceReport {
        space: config.space,
        class_count: space.class_count,
        classes_with_gt: gt_counts.len() as u32,
        results,
    };
    (report, matches, curves)
}
