//! Anticipation-timestamp grid and ground-truth future-action windows.
//!
//! Timestamps are `k * alpha` for `k = 1, 2, ...` while `k * alpha <= duration`.
//! The window at `t` holds every action with `0 < start - t <= horizon`,
//! tagged with its time-to-action `start - t`.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotations::{project_label, LabelKind, VideoRecord};
use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.25;
pub const DEFAULT_HORIZON: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Grid step in seconds.
    pub alpha: f64,
    /// Anticipation horizon in seconds.
    pub horizon: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            horizon: DEFAULT_HORIZON,
        }
    }
}

impl GridConfig {
    pub fn new(alpha: f64, horizon: f64) -> Result<Self> {
        let grid = Self { alpha, horizon };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::Argument(format!(
                "grid step must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::Argument(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        Ok(())
    }

    /// Timestamp of grid index `k` (1-based), computed from the integer index.
    #[inline]
    pub fn timestamp(&self, k: usize) -> f64 {
        k as f64 * self.alpha
    }

    /// Number of grid points `k >= 1` with `k * alpha <= duration`.
    pub fn grid_len(&self, duration: f64) -> usize {
        if duration.is_nan() || duration <= 0.0 {
            return 0;
        }
        let mut n = (duration / self.alpha).floor() as usize;
        while self.timestamp(n + 1) <= duration {
            n += 1;
        }
        while n > 0 && self.timestamp(n) > duration {
            n -= 1;
        }
        n
    }

    /// Grid index of `t` if it lies on the grid (within `tolerance`), else
    /// `None`. With `snap`, the nearest index is returned instead.
    pub fn index_of(&self, t: f64, snap: bool) -> Option<usize> {
        const TOLERANCE: f64 = 1e-6;
        if !t.is_finite() {
            return None;
        }
        let k = (t / self.alpha).round();
        if k < 1.0 {
            return None;
        }
        let k = k as usize;
        (snap || (self.timestamp(k) - t).abs() <= TOLERANCE).then_some(k)
    }

    /// Time-to-action of an action starting at `start`, if it falls in the
    /// window at `t`.
    #[inline]
    pub fn time_to_action(&self, start: f64, t: f64) -> Option<f64> {
        let tau = start - t;
        (tau > 0.0 && tau <= self.horizon).then_some(tau)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowItem {
    pub class_id: u32,
    pub tau: f64,
}

/// Future actions visible from one anticipation timestamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthWindow {
    pub video_id: String,
    pub t_a: f64,
    /// Sorted by `tau`; empty means "no action".
    pub items: Vec<WindowItem>,
}

pub fn sample_timestamps(video: &VideoRecord, grid: &GridConfig) -> Vec<f64> {
    (1..=grid.grid_len(video.duration)).map(|k| grid.timestamp(k)).collect()
}

pub fn build_window(video: &VideoRecord, t_a: f64, grid: &GridConfig, kind: LabelKind) -> Result<GroundTruthWindow> {
    grid.validate()?;
    if !(t_a > 0.0 && t_a <= video.duration) {
        return Err(Error::Argument(format!(
            "{}: anticipation time {t_a} outside (0, {}]",
            video.video_id, video.duration
        )));
    }
    let mut items: Vec<WindowItem> = video
        .actions
        .iter()
        .filter_map(|a| {
            grid.time_to_action(a.start, t_a).map(|tau| WindowItem {
                class_id: project_label(a, kind),
                tau,
            })
        })
        .collect();
    items.sort_by(|a, b| a.tau.total_cmp(&b.tau));
    Ok(GroundTruthWindow {
        video_id: video.video_id.clone(),
        t_a,
        items,
    })
}

/// Every window of a dataset in one label space, stored flat.
#[derive(Debug, Clone)]
pub struct WindowSet {
    grid: GridConfig,
    kind: LabelKind,
    videos: Vec<String>,
    video_lookup: HashMap<String, usize>,
    /// `video_first[v]..video_first[v + 1]` are the windows of video `v`.
    video_first: Vec<usize>,
    window_video: Vec<u32>,
    /// `item_offsets[w]..item_offsets[w + 1]` index `classes`/`taus`.
    item_offsets: Vec<usize>,
    classes: Vec<u32>,
    taus: Vec<f64>,
    inferred_durations: usize,
}

struct VideoWindows {
    counts: Vec<usize>,
    classes: Vec<u32>,
    taus: Vec<f64>,
}

fn sweep_video(video: &VideoRecord, grid: &GridConfig, kind: LabelKind) -> VideoWindows {
    let n = grid.grid_len(video.duration);
    let actions = &video.actions;
    let mut out = VideoWindows {
        counts: Vec::with_capacity(n),
        classes: Vec::new(),
        taus: Vec::new(),
    };
    // `lo` is the first action strictly after t, `hi` the first beyond t + horizon.
    let (mut lo, mut hi) = (0, 0);
    for k in 1..=n {
        let t = grid.timestamp(k);
        while lo < actions.len() && actions[lo].start - t <= 0.0 {
            lo += 1;
        }
        hi = hi.max(lo);
        while hi < actions.len() && actions[hi].start - t <= grid.horizon {
            hi += 1;
        }
        for a in &actions[lo..hi] {
            out.classes.push(project_label(a, kind));
            out.taus.push(a.start - t);
        }
        out.counts.push(hi - lo);
    }
    out
}

impl WindowSet {
    pub fn build(videos: &[VideoRecord], grid: &GridConfig, kind: LabelKind) -> Result<Self> {
        grid.validate()?;
        let mut video_lookup = HashMap::with_capacity(videos.len());
        for (i, v) in videos.iter().enumerate() {
            if video_lookup.insert(v.video_id.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate video id '{}'", v.video_id)));
            }
        }
        let per_video: Vec<VideoWindows> = videos.par_iter().map(|v| sweep_video(v, grid, kind)).collect();

        let total_windows: usize = per_video.iter().map(|p| p.counts.len()).sum();
        let total_items: usize = per_video.iter().map(|p| p.classes.len()).sum();
        let mut set = WindowSet {
            grid: *grid,
            kind,
            videos: videos.iter().map(|v| v.video_id.clone()).collect(),
            video_lookup,
            video_first: Vec::with_capacity(videos.len() + 1),
            window_video: Vec::with_capacity(total_windows),
            item_offsets: Vec::with_capacity(total_windows + 1),
            classes: Vec::with_capacity(total_items),
            taus: Vec::with_capacity(total_items),
            inferred_durations: videos.iter().filter(|v| v.duration_inferred).count(),
        };
        set.item_offsets.push(0);
        for (v, pv) in per_video.into_iter().enumerate() {
            set.video_first.push(set.window_video.len());
            for c in pv.counts {
                set.window_video.push(v as u32);
                let last = *set.item_offsets.last().unwrap_or(&0);
                set.item_offsets.push(last + c);
            }
            set.classes.extend(pv.classes);
            set.taus.extend(pv.taus);
        }
        set.video_first.push(set.window_video.len());
        Ok(set)
    }

    pub fn grid(&self) -> &GridConfig {
        &self.grid
    }

    pub fn kind(&self) -> LabelKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.window_video.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window_video.is_empty()
    }

    pub fn videos(&self) -> &[String] {
        &self.videos
    }

    pub fn video_index(&self, video_id: &str) -> Option<usize> {
        self.video_lookup.get(video_id).copied()
    }

    pub fn inferred_durations(&self) -> usize {
        self.inferred_durations
    }

    /// Number of grid timestamps of video `v`.
    pub fn window_count(&self, v: usize) -> usize {
        self.video_first[v + 1] - self.video_first[v]
    }

    /// Window index of video `v` at 1-based grid index `k`.
    pub fn locate(&self, v: usize, k: usize) -> Option<usize> {
        (k >= 1 && k <= self.window_count(v)).then(|| self.video_first[v] + k - 1)
    }

    /// `(video index, 1-based grid index)` of window `w`.
    pub fn position(&self, w: usize) -> (usize, usize) {
        let v = self.window_video[w] as usize;
        (v, w - self.video_first[v] + 1)
    }

    pub fn t_a(&self, w: usize) -> f64 {
        self.grid.timestamp(self.position(w).1)
    }

    /// Class ids and times-to-action of window `w`, sorted by time.
    pub fn items(&self, w: usize) -> (&[u32], &[f64]) {
        let r = self.item_offsets[w]..self.item_offsets[w + 1];
        (&self.classes[r.clone()], &self.taus[r])
    }

    pub fn item_count(&self, w: usize) -> usize {
        self.item_offsets[w + 1] - self.item_offsets[w]
    }

    pub fn total_items(&self) -> usize {
        self.classes.len()
    }

    /// All GT instance classes, one entry per (window, item) pair.
    pub fn item_classes(&self) -> &[u32] {
        &self.classes
    }

    pub fn window(&self, w: usize) -> GroundTruthWindow {
        let (classes, taus) = self.items(w);
        GroundTruthWindow {
            video_id: self.videos[self.window_video[w] as usize].clone(),
            t_a: self.t_a(w),
            items: classes
                .iter()
                .zip(taus)
                .map(|(&class_id, &tau)| WindowItem { class_id, tau })
                .collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = GroundTruthWindow> + '_ {
        (0..self.len()).map(|w| self.window(w))
    }

    pub fn stats(&self) -> Result<StatsReport> {
        let mut acc = StatsAccumulator::default();
        for w in 0..self.len() {
            acc.add(self.items(w).0.iter().copied());
        }
        acc.finish()
    }

    /// Dumps `video_id,t_a,class,tau`; an empty window yields one row with
    /// blank class and tau.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let internal = |e: csv::Error| Error::Internal(e.to_string());
        w.write_record(["video_id", "t_a", "class", "tau"]).map_err(internal)?;
        for idx in 0..self.len() {
            let (v, _) = self.position(idx);
            let video = self.videos[v].as_str();
            let t = self.t_a(idx).to_string();
            let (classes, taus) = self.items(idx);
            if classes.is_empty() {
                w.write_record([video, t.as_str(), "", ""]).map_err(internal)?;
            }
            for (c, tau) in classes.iter().zip(taus) {
                w.write_record([video, t.as_str(), &c.to_string(), &tau.to_string()])
                    .map_err(internal)?;
            }
        }
        w.flush().map_err(|e| Error::Internal(e.to_string()))
    }
}

/// Summary of a set of windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub total_timestamps: u64,
    pub no_action_fraction: f64,
    pub multi_action_fraction: f64,
    /// `item_histogram[n]` = number of windows with exactly `n` items.
    pub item_histogram: Vec<u64>,
    pub gt_instances: u64,
    pub class_counts: BTreeMap<u32, u64>,
}

#[derive(Default)]
struct StatsAccumulator {
    histogram: Vec<u64>,
    class_counts: BTreeMap<u32, u64>,
    total: u64,
    items: u64,
}

impl StatsAccumulator {
    fn add(&mut self, classes: impl Iterator<Item = u32>) {
        let mut n = 0;
        for c in classes {
            *self.class_counts.entry(c).or_default() += 1;
            n += 1;
        }
        if self.histogram.len() <= n {
            self.histogram.resize(n + 1, 0);
        }
        self.histogram[n] += 1;
        self.total += 1;
        self.items += n as u64;
    }

    fn finish(self) -> Result<StatsReport> {
        if self.total == 0 {
            return Err(Error::Argument("statistics need at least one window".into()));
        }
        let empty = self.histogram.first().copied().unwrap_or(0);
        let multi: u64 = self.histogram.iter().skip(2).sum();
        Ok(StatsReport {
            total_timestamps: self.total,
            no_action_fraction: empty as f64 / self.total as f64,
            multi_action_fraction: multi as f64 / self.total as f64,
            item_histogram: self.histogram,
            gt_instances: self.items,
            class_counts: self.class_counts,
        })
    }
}

pub fn dataset_stats(windows: &[GroundTruthWindow]) -> Result<StatsReport> {
    let mut acc = StatsAccumulator::default();
    for w in windows {
        acc.add(w.items.iter().map(|i| i.class_id));
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::{ActionInstance, Vocabulary};

    fn video(duration: f64, starts: &[f64]) -> VideoRecord {
        let vocab = Vocabulary::new(4, 4).unwrap();
        let actions = starts
            .iter()
            .enumerate()
            .map(|(i, &s)| ActionInstance::new("v", s, s + 0.5, (i % 4) as u32, 1, &vocab).unwrap())
            .collect();
        VideoRecord::new("v", duration, actions).unwrap()
    }

    #[test]
    fn grid_examples() {
        let g = GridConfig::default();
        assert_eq!(sample_timestamps(&video(1.0, &[]), &g), [0.25, 0.5, 0.75, 1.0]);
        assert!(sample_timestamps(&video(0.2, &[]), &g).is_empty());
        assert_eq!(sample_timestamps(&video(1.1, &[]), &g), [0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn grid_len_handles_inexact_steps() {
        let g = GridConfig::new(0.1, 5.0).unwrap();
        // 3 * 0.1 > 0.3 in binary
        assert_eq!(g.grid_len(0.3), 2);
        assert_eq!(g.grid_len(0.30000000000000004), 3);
    }

    #[test]
    fn window_boundaries() {
        let g = GridConfig::default();
        let v = video(10.0, &[1.0, 3.0, 6.0, 7.0]);
        let w = build_window(&v, 1.0, &g, LabelKind::Verb).unwrap();
        let taus: Vec<f64> = w.items.iter().map(|i| i.tau).collect();
        // 1.0 not strictly future, 6.0 exactly at the horizon, 7.0 beyond it
        assert_eq!(taus, [2.0, 5.0]);
        assert_eq!(w.items[0].class_id, 1);
    }

    #[test]
    fn window_out_of_range() {
        let g = GridConfig::default();
        let v = video(10.0, &[]);
        assert!(build_window(&v, 0.0, &g, LabelKind::Verb).is_err());
        assert!(build_window(&v, 10.25, &g, LabelKind::Verb).is_err());
        assert!(build_window(&v, 10.0, &g, LabelKind::Verb).is_ok());
    }

    #[test]
    fn stats_examples() {
        let mk = |n: usize| GroundTruthWindow {
            video_id: "v".into(),
            t_a: 1.0,
            items: (0..n)
                .map(|i| WindowItem {
                    class_id: i as u32,
                    tau: 1.0,
                })
                .collect(),
        };
        let s = dataset_stats(&[mk(0), mk(0), mk(1), mk(2), mk(3)]).unwrap();
        assert_eq!(s.no_action_fraction, 0.4);
        assert_eq!(s.multi_action_fraction, 0.4);
        assert_eq!(s.item_histogram, [2, 1, 1, 1]);
        assert_eq!(s.class_counts[&0], 3);

        let s = dataset_stats(&[mk(0), mk(0)]).unwrap();
        assert_eq!((s.no_action_fraction, s.multi_action_fraction), (1.0, 0.0));
        assert!(dataset_stats(&[]).is_err());
    }

    #[test]
    fn set_matches_single_window_builder() {
        let g = GridConfig::default();
        let v = video(12.0, &[0.1, 1.0, 1.0, 2.35, 6.0, 11.9]);
        let set = WindowSet::build(std::slice::from_ref(&v), &g, LabelKind::Verb).unwrap();
        assert_eq!(set.len(), 48);
        for (w, t) in sample_timestamps(&v, &g).into_iter().enumerate() {
            assert_eq!(set.window(w), build_window(&v, t, &g, LabelKind::Verb).unwrap());
        }
    }

    #[test]
    fn duplicate_video_ids_rejected() {
        let v = video(2.0, &[]);
        assert!(WindowSet::build(&[v.clone(), v], &GridConfig::default(), LabelKind::Verb).is_err());
    }

    #[test]
    fn index_of_grid_points() {
        let g = GridConfig::default();
        assert_eq!(g.index_of(0.75, false), Some(3));
        assert_eq!(g.index_of(0.8, false), None);
        assert_eq!(g.index_of(0.8, true), Some(3));
        assert_eq!(g.index_of(0.1, true), None);
    }
}
