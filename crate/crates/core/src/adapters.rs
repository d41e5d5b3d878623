//! Turning per-class score outputs of trimmed anticipation models into
//! untrimmed predictions.
//!
//! Score files hold one dense score vector per `(video, t, horizon)`:
//!
//! * CSV: `video_id,t,horizon,<one column per class>`
//! * JSON lines: `{"video_id", "t", "horizon", "scores"}` where `scores` is
//!   either a dense array or a sparse `{"class": score}` object
//! * binary (`.uaas`): little-endian; magic `UAAS`, `u32` version, `u32`
//!   class count, `u64` frame count, then per frame a `u16`-prefixed UTF-8
//!   video id, `f64` t, `f64` horizon and `class count` `f32` scores

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::Prediction;

pub const DEFAULT_THRESHOLD: f64 = 0.1;
pub const DEFAULT_FIXED_TTA: f64 = 1.0;
pub const DEFAULT_HORIZONS: [f64; 5] = [1.0, 2.0, 3.0, 4.0, 5.0];

const MAGIC: &[u8; 4] = b"UAAS";
const BINARY_VERSION: u32 = 1;

/// Per-class confidences of one model output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreFrame {
    pub video_id: String,
    pub t: f64,
    pub horizon: f64,
    pub scores: Vec<f64>,
}

impl ScoreFrame {
    fn validate(&self, class_count: Option<usize>) -> std::result::Result<(), String> {
        if let Some(n) = class_count {
            if self.scores.len() != n {
                return Err(format!("expected {n} scores, found {}", self.scores.len()));
            }
        }
        if let Some((c, s)) = self.scores.iter().enumerate().find(|(_, s)| !(0.0..=1.0).contains(*s)) {
            return Err(format!("score {s} of class {c} outside [0, 1]"));
        }
        if !self.t.is_finite() || !self.horizon.is_finite() {
            return Err("non-finite time".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreFormat {
    Csv,
    JsonLines,
    Binary,
}

impl ScoreFormat {
    pub fn from_path(path: &Path) -> Self {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("jsonl" | "json" | "ndjson") => ScoreFormat::JsonLines,
            Some("uaas" | "bin") => ScoreFormat::Binary,
            _ => ScoreFormat::Csv,
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonScores {
    Dense(Vec<f64>),
    Sparse(BTreeMap<String, f64>),
}

#[derive(Deserialize)]
struct JsonFrame {
    video_id: String,
    t: f64,
    horizon: f64,
    scores: JsonScores,
}

/// Reads a score file. `class_count` is required for sparse JSON scores and
/// otherwise checked when given.
pub fn read_score_frames(path: impl AsRef<Path>, class_count: Option<usize>) -> Result<Vec<ScoreFrame>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_score_frames_from(BufReader::new(file), path, ScoreFormat::from_path(path), class_count)
}

pub fn read_score_frames_from<R: Read>(
    reader: R,
    source: &Path,
    format: ScoreFormat,
    class_count: Option<usize>,
) -> Result<Vec<ScoreFrame>> {
    let mut frames = Vec::new();
    let mut expected = class_count;
    let check =
        |frame: ScoreFrame, row: usize, frames: &mut Vec<ScoreFrame>, expected: &mut Option<usize>| -> Result<()> {
            frame.validate(*expected).map_err(|m| Error::parse(source, row, m))?;
            expected.get_or_insert(frame.scores.len());
            frames.push(frame);
            Ok(())
        };
    match format {
        ScoreFormat::Csv => {
            let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
            let headers = rdr
                .headers()
                .map_err(|e| Error::parse(source, 1, e.to_string()))?
                .clone();
            let fixed: Vec<&str> = headers.iter().take(3).collect();
            if fixed != ["video_id", "t", "horizon"] {
                return Err(Error::parse(source, 1, "header must start with video_id,t,horizon"));
            }
            for rec in rdr.records() {
                let rec = rec
                    .map_err(|e| Error::parse(source, e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
                let row = rec.position().map_or(0, |p| p.line() as usize);
                let num = |i: usize| {
                    rec.get(i)
                        .unwrap_or("")
                        .parse::<f64>()
                        .map_err(|_| Error::parse(source, row, format!("column {} is not a number", i + 1)))
                };
                let scores = (3..rec.len()).map(num).collect::<Result<Vec<f64>>>()?;
                let frame = ScoreFrame {
                    video_id: rec.get(0).unwrap_or("").to_string(),
                    t: num(1)?,
                    horizon: num(2)?,
                    scores,
                };
                check(frame, row, &mut frames, &mut expected)?;
            }
        }
        ScoreFormat::JsonLines => {
            for (i, line) in BufReader::new(reader).lines().enumerate() {
                let line = line.map_err(|e| Error::io(source, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let row = i + 1;
                let raw: JsonFrame =
                    serde_json::from_str(&line).map_err(|e| Error::parse(source, row, e.to_string()))?;
                let scores = match raw.scores {
                    JsonScores::Dense(v) => v,
                    JsonScores::Sparse(map) => {
                        let n =
                            expected.ok_or_else(|| Error::parse(source, row, "sparse scores need the class count"))?;
                        let mut dense = vec![0.0; n];
                        for (k, v) in map {
                            let c: usize = k
                                .parse()
                                .ok()
                                .filter(|&c| c < n)
                                .ok_or_else(|| Error::parse(source, row, format!("bad class key '{k}'")))?;
                            dense[c] = v;
                        }
                        dense
                    }
                };
                let frame = ScoreFrame {
                    video_id: raw.video_id,
                    t: raw.t,
                    horizon: raw.horizon,
                    scores,
                };
                check(frame, row, &mut frames, &mut expected)?;
            }
        }
        ScoreFormat::Binary => {
            let mut r = BufReader::new(reader);
            let bad = |m: &str| Error::parse(source, 0, m.to_string());
            let mut head = [0u8; 20];
            r.read_exact(&mut head).map_err(|_| bad("truncated header"))?;
            if &head[..4] != MAGIC {
                return Err(bad("not a score file (bad magic)"));
            }
            let version = u32::from_le_bytes(head[4..8].try_into().expect("4 bytes"));
            if version != BINARY_VERSION {
                return Err(bad(&format!("unsupported version {version}")));
            }
            let n_classes = u32::from_le_bytes(head[8..12].try_into().expect("4 bytes")) as usize;
            let n_frames = u64::from_le_bytes(head[12..20].try_into().expect("8 bytes"));
            let mut buf = Vec::new();
            for i in 0..n_frames {
                let row = i as usize + 1;
                let truncated = |_| Error::parse(source, row, "truncated frame");
                let mut len = [0u8; 2];
                r.read_exact(&mut len).map_err(truncated)?;
                let mut id = vec![0u8; u16::from_le_bytes(len) as usize];
                r.read_exact(&mut id).map_err(truncated)?;
                let video_id = String::from_utf8(id).map_err(|_| Error::parse(source, row, "video id is not UTF-8"))?;
                let mut times = [0u8; 16];
                r.read_exact(&mut times).map_err(truncated)?;
                buf.resize(n_classes * 4, 0);
                r.read_exact(&mut buf).map_err(truncated)?;
                let scores = buf
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
                    .collect();
                let frame = ScoreFrame {
                    video_id,
                    t: f64::from_le_bytes(times[..8].try_into().expect("8 bytes")),
                    horizon: f64::from_le_bytes(times[8..].try_into().expect("8 bytes")),
                    scores,
                };
                check(frame, row, &mut frames, &mut expected)?;
            }
        }
    }
    Ok(frames)
}

pub fn write_score_frames(path: impl AsRef<Path>, frames: &[ScoreFrame]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_score_frames_to(&mut w, frames, ScoreFormat::from_path(path))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes frames; the binary format stores scores as `f32`.
pub fn write_score_frames_to<W: Write>(mut writer: W, frames: &[ScoreFrame], format: ScoreFormat) -> Result<()> {
    let internal = |e: std::io::Error| Error::Internal(e.to_string());
    let n_classes = frames.first().map_or(0, |f| f.scores.len());
    if frames.iter().any(|f| f.scores.len() != n_classes) {
        return Err(Error::Argument("frames have differing class counts".into()));
    }
    match format {
        ScoreFormat::Csv => {
            let mut w = csv::Writer::from_writer(writer);
            let mut header = vec!["video_id".to_string(), "t".into(), "horizon".into()];
            header.extend((0..n_classes).map(|c| format!("s{c}")));
            w.write_record(&header).map_err(|e| Error::Internal(e.to_string()))?;
            for f in frames {
                let mut rec = vec![f.video_id.clone(), f.t.to_string(), f.horizon.to_string()];
                rec.extend(f.scores.iter().map(|s| s.to_string()));
                w.write_record(&rec).map_err(|e| Error::Internal(e.to_string()))?;
            }
            w.flush().map_err(internal)
        }
        ScoreFormat::JsonLines => {
            for f in frames {
                serde_json::to_writer(&mut writer, f).map_err(|e| Error::Internal(e.to_string()))?;
                writer.write_all(b"\n").map_err(internal)?;
            }
            Ok(())
        }
        ScoreFormat::Binary => {
            writer.write_all(MAGIC).map_err(internal)?;
            writer.write_all(&BINARY_VERSION.to_le_bytes()).map_err(internal)?;
            writer.write_all(&(n_classes as u32).to_le_bytes()).map_err(internal)?;
            writer
                .write_all(&(frames.len() as u64).to_le_bytes())
                .map_err(internal)?;
            for f in frames {
                let id = f.video_id.as_bytes();
                let len = u16::try_from(id.len())
                    .map_err(|_| Error::Argument(format!("video id too long: {}", f.video_id)))?;
                writer.write_all(&len.to_le_bytes()).map_err(internal)?;
                writer.write_all(id).map_err(internal)?;
                writer.write_all(&f.t.to_le_bytes()).map_err(internal)?;
                writer.write_all(&f.horizon.to_le_bytes()).map_err(internal)?;
                for s in &f.scores {
                    writer.write_all(&(*s as f32).to_le_bytes()).map_err(internal)?;
                }
            }
            Ok(())
        }
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if (0.0..1.0).contains(&threshold) {
        Ok(())
    } else {
        Err(Error::Argument(format!("threshold {threshold} outside [0, 1)")))
    }
}

fn emit(frame: &ScoreFrame, threshold: f64, tta: f64, skip: Option<u32>, out: &mut Vec<Prediction>) {
    for (c, &s) in frame.scores.iter().enumerate() {
        let c = c as u32;
        if s > threshold && Some(c) != skip {
            out.push(Prediction::new(frame.video_id.clone(), frame.t, c, tta, s));
        }
    }
}

/// Every class scoring strictly above `threshold` becomes a prediction at
/// `fixed_tta`. A frame with no such class predicts nothing.
pub fn adapt_fixed_tta(frames: &[ScoreFrame], threshold: f64, fixed_tta: f64) -> Result<Vec<Prediction>> {
    adapt_fixed_tta_excluding(frames, threshold, fixed_tta, None)
}

/// As [`adapt_fixed_tta`], but `no_action_class` (a model's explicit
/// "nothing happens" output) never produces a prediction.
pub fn adapt_fixed_tta_excluding(
    frames: &[ScoreFrame],
    threshold: f64,
    fixed_tta: f64,
    no_action_class: Option<u32>,
) -> Result<Vec<Prediction>> {
    check_threshold(threshold)?;
    if !fixed_tta.is_finite() {
        return Err(Error::Argument("fixed time-to-action must be finite".into()));
    }
    if let Some(first) = frames.first() {
        if let Some(f) = frames.iter().find(|f| f.horizon != first.horizon) {
            return Err(Error::Argument(format!(
                "frames mix horizons {} and {} ({} @ {})",
                first.horizon, f.horizon, f.video_id, f.t
            )));
        }
    }
    let mut out = Vec::new();
    for f in frames {
        emit(f, threshold, fixed_tta, no_action_class, &mut out);
    }
    Ok(out)
}

/// Splits frames into one list per distinct horizon, ascending.
pub fn group_by_horizon(frames: Vec<ScoreFrame>) -> Vec<Vec<ScoreFrame>> {
    let mut groups: BTreeMap<u64, Vec<ScoreFrame>> = BTreeMap::new();
    for f in frames {
        // positive finite doubles order like their bit patterns
        groups.entry(f.horizon.to_bits()).or_default().push(f);
    }
    groups.into_values().collect()
}

/// Frames of one horizon keyed by (video, timestamp bits).
type FrameIndex<'a> = HashMap<(&'a str, u64), &'a ScoreFrame>;

/// Multi-horizon fusion: each horizon's model emits its over-threshold
/// classes with time-to-action equal to that horizon, and all emissions
/// are kept. Every set must cover the same `(video, t)` points.
pub fn adapt_multi_horizon(frame_sets: &[Vec<ScoreFrame>], threshold: f64) -> Result<Vec<Prediction>> {
    check_threshold(threshold)?;
    let mut sets: Vec<(f64, FrameIndex<'_>)> = Vec::with_capacity(frame_sets.len());
    for set in frame_sets {
        let Some(first) = set.first() else {
            continue;
        };
        let mut index = HashMap::with_capacity(set.len());
        for f in set {
            if f.horizon != first.horizon {
                return Err(Error::Argument(format!(
                    "one frame set mixes horizons {} and {}",
                    first.horizon, f.horizon
                )));
            }
            if index.insert((f.video_id.as_str(), f.t.to_bits()), f).is_some() {
                return Err(Error::Alignment(format!(
                    "duplicate frame {} @ {} at horizon {}",
                    f.video_id, f.t, f.horizon
                )));
            }
        }
        sets.push((first.horizon, index));
    }
    sets.sort_by(|a, b| a.0.total_cmp(&b.0));
    if sets.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::Argument("two frame sets share a horizon".into()));
    }
    let Some((_, reference)) = sets.first() else {
        return Ok(Vec::new());
    };
    let mut keys: Vec<(&str, u64)> = reference.keys().copied().collect();
    for (h, index) in &sets {
        if let Some(&(v, t)) = keys.iter().find(|k| !index.contains_key(*k)) {
            return Err(Error::Alignment(format!(
                "{v} @ {} has no frame at horizon {h}",
                f64::from_bits(t)
            )));
        }
        if index.len() != keys.len() {
            let extra = index
                .keys()
                .find(|k| !reference.contains_key(*k))
                .expect("sizes differ");
            return Err(Error::Alignment(format!(
                "{} @ {} has no frame at horizon {}",
                extra.0,
                f64::from_bits(extra.1),
                sets[0].0
            )));
        }
    }
    keys.sort_by(|a, b| a.0.cmp(b.0).then(f64::from_bits(a.1).total_cmp(&f64::from_bits(b.1))));
    let mut out = Vec::new();
    for key in keys {
        for (h, index) in &sets {
            emit(index[&key], threshold, *h, None, &mut out);
        }
    }
    Ok(out)
}
