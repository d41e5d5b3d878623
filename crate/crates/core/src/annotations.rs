//! Action annotations, label vocabularies and the CSV reader/writer for them.
//!
//! The reader accepts EPIC-KITCHENS-100 style files out of the box (columns
//! `video_id`, `start_timestamp`, `stop_timestamp`, `verb_class`,
//! `noun_class`); other layouts are handled through [`ColumnNames`].

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which classification target is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    Action,
    Verb,
    Noun,
}

impl LabelKind {
    pub const ALL: [LabelKind; 3] = [LabelKind::Action, LabelKind::Verb, LabelKind::Noun];

    pub fn as_str(self) -> &'static str {
        match self {
            LabelKind::Action => "action",
            LabelKind::Verb => "verb",
            LabelKind::Noun => "noun",
        }
    }
}

impl fmt::Display for LabelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LabelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "action" => Ok(LabelKind::Action),
            "verb" => Ok(LabelKind::Verb),
            "noun" => Ok(LabelKind::Noun),
            other => Err(Error::Argument(format!(
                "unknown label space '{other}' (expected action, verb or noun)"
            ))),
        }
    }
}

/// A concrete label space: its kind, size and optional class names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSpace {
    pub kind: LabelKind,
    pub class_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<BTreeMap<u32, String>>,
}

impl LabelSpace {
    pub fn new(kind: LabelKind, class_count: u32) -> Result<Self> {
        if class_count == 0 {
            return Err(Error::Argument(format!(
                "{kind} label space must have at least one class"
            )));
        }
        Ok(Self {
            kind,
            class_count,
            names: None,
        })
    }

    pub fn check(&self, class: u32) -> Result<()> {
        if class < self.class_count {
            Ok(())
        } else {
            Err(Error::Vocabulary {
                class,
                space: self.kind.to_string(),
                count: self.class_count,
            })
        }
    }
}

/// Verb and noun vocabularies. Action classes are the verb-noun product,
/// encoded as `verb * noun_count + noun`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub verb_count: u32,
    pub noun_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verb_names: Option<BTreeMap<u32, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noun_names: Option<BTreeMap<u32, String>>,
}

impl Vocabulary {
    pub fn new(verb_count: u32, noun_count: u32) -> Result<Self> {
        if verb_count == 0 || noun_count == 0 {
            return Err(Error::Argument("verb and noun vocabularies must be nonempty".into()));
        }
        if verb_count.checked_mul(noun_count).is_none() {
            return Err(Error::Argument(format!(
                "action vocabulary {verb_count} x {noun_count} does not fit in 32 bits"
            )));
        }
        Ok(Self {
            verb_count,
            noun_count,
            verb_names: None,
            noun_names: None,
        })
    }

    /// Loads class lists in the EPIC-KITCHENS layout (`id,key,...`).
    pub fn from_class_files(verb_csv: impl AsRef<Path>, noun_csv: impl AsRef<Path>) -> Result<Self> {
        let verbs = read_class_file(verb_csv.as_ref())?;
        let nouns = read_class_file(noun_csv.as_ref())?;
        let verb_count = verbs.keys().next_back().map_or(0, |&k| k + 1);
        let noun_count = nouns.keys().next_back().map_or(0, |&k| k + 1);
        let mut vocab = Self::new(verb_count, noun_count)?;
        vocab.verb_names = Some(verbs);
        vocab.noun_names = Some(nouns);
        Ok(vocab)
    }

    pub fn action_count(&self) -> u32 {
        self.verb_count * self.noun_count
    }

    pub fn class_count(&self, kind: LabelKind) -> u32 {
        match kind {
            LabelKind::Action => self.action_count(),
            LabelKind::Verb => self.verb_count,
            LabelKind::Noun => self.noun_count,
        }
    }

    pub fn encode_action(&self, verb: u32, noun: u32) -> u32 {
        debug_assert!(verb < self.verb_count && noun < self.noun_count);
        verb * self.noun_count + noun
    }

    /// Inverse of [`Vocabulary::encode_action`]: `(verb, noun)`.
    pub fn decode_action(&self, action: u32) -> (u32, u32) {
        (action / self.noun_count, action % self.noun_count)
    }

    /// Maps an action class onto another label space.
    pub fn project_action(&self, action: u32, kind: LabelKind) -> u32 {
        let (verb, noun) = self.decode_action(action);
        match kind {
            LabelKind::Action => action,
            LabelKind::Verb => verb,
            LabelKind::Noun => noun,
        }
    }

    pub fn space(&self, kind: LabelKind) -> LabelSpace {
        let names = match kind {
            LabelKind::Verb => self.verb_names.clone(),
            LabelKind::Noun => self.noun_names.clone(),
            LabelKind::Action => match (&self.verb_names, &self.noun_names) {
                (Some(v), Some(n)) => Some(
                    v.iter()
                        .flat_map(|(&vi, vn)| {
                            n.iter()
                                .map(move |(&ni, nn)| (self.encode_action(vi, ni), format!("{vn} {nn}")))
                        })
                        .collect(),
                ),
                _ => None,
            },
        };
        LabelSpace {
            kind,
            class_count: self.class_count(kind),
            names,
        }
    }
}

fn read_class_file(path: &Path) -> Result<BTreeMap<u32, String>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let id_col = find_column(&headers, "id").ok_or_else(|| Error::parse(path, 1, "missing 'id' column"))?;
    let key_col = find_column(&headers, "key");
    let mut out = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let row = line_of(&rec);
        let id: u32 = rec
            .get(id_col)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::parse(path, row, "class id is not a non-negative integer"))?;
        let key = key_col.and_then(|c| rec.get(c)).unwrap_or_default().trim().to_string();
        out.insert(id, key);
    }
    if out.is_empty() {
        return Err(Error::parse(path, 1, "class list is empty"));
    }
    Ok(out)
}

/// One labeled action in a video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionInstance {
    pub video_id: String,
    pub start: f64,
    pub stop: f64,
    pub verb_class: u32,
    pub noun_class: u32,
    pub action_class: u32,
}

impl ActionInstance {
    pub fn new(
        video_id: impl Into<String>,
        start: f64,
        stop: f64,
        verb: u32,
        noun: u32,
        vocab: &Vocabulary,
    ) -> Result<Self> {
        let video_id = video_id.into();
        if !(start.is_finite() && stop.is_finite()) || start < 0.0 {
            return Err(Error::Validation(format!(
                "{video_id}: action times must be finite with start >= 0 (got {start}, {stop})"
            )));
        }
        if stop <= start {
            return Err(Error::Validation(format!(
                "{video_id}: action stop {stop} is not after start {start}"
            )));
        }
        vocab.space(LabelKind::Verb).check(verb)?;
        vocab.space(LabelKind::Noun).check(noun)?;
        Ok(Self {
            video_id,
            start,
            stop,
            verb_class: verb,
            noun_class: noun,
            action_class: vocab.encode_action(verb, noun),
        })
    }
}

/// Returns the class of `instance` in the given label space.
pub fn project_label(instance: &ActionInstance, kind: LabelKind) -> u32 {
    match kind {
        LabelKind::Action => instance.action_class,
        LabelKind::Verb => instance.verb_class,
        LabelKind::Noun => instance.noun_class,
    }
}

/// All annotated actions of one video, sorted by start time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub video_id: String,
    pub duration: f64,
    /// True when no duration was supplied and it was set to the last stop
    /// time plus the anticipation horizon.
    pub duration_inferred: bool,
    pub actions: Vec<ActionInstance>,
}

impl VideoRecord {
    /// Builds a record, sorting actions and validating them against `duration`.
    pub fn new(video_id: impl Into<String>, duration: f64, mut actions: Vec<ActionInstance>) -> Result<Self> {
        let video_id = video_id.into();
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::Validation(format!(
                "{video_id}: duration must be positive, got {duration}"
            )));
        }
        sort_actions(&mut actions);
        if let Some(a) = actions.iter().find(|a| a.start >= duration) {
            return Err(Error::Validation(format!(
                "{video_id}: action starting at {} is not before the video end {duration}",
                a.start
            )));
        }
        Ok(Self {
            video_id,
            duration,
            duration_inferred: false,
            actions,
        })
    }
}

fn sort_actions(actions: &mut [ActionInstance]) {
    actions.sort_by(|a, b| {
        a.start
            .total_cmp(&b.start)
            .then(a.stop.total_cmp(&b.stop))
            .then(a.action_class.cmp(&b.action_class))
    });
}

/// Header names of the required (and optional) annotation columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnNames {
    pub video_id: String,
    pub start: String,
    pub stop: String,
    pub verb: String,
    pub noun: String,
    pub duration: String,
}

impl Default for ColumnNames {
    fn default() -> Self {
        Self {
            video_id: "video_id".into(),
            start: "start_timestamp".into(),
            stop: "stop_timestamp".into(),
            verb: "verb_class".into(),
            noun: "noun_class".into(),
            duration: "duration".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParseOptions {
    pub columns: ColumnNames,
    /// Horizon used for the duration fallback.
    pub horizon: f64,
    /// Externally supplied durations; take precedence over a duration column.
    pub durations: Option<HashMap<String, f64>>,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            columns: ColumnNames::default(),
            horizon: crate::windowing::DEFAULT_HORIZON,
            durations: None,
        }
    }
}

/// Parses `"HH:MM:SS.ss"` (or `"MM:SS.ss"`) and plain decimal seconds.
///
/// The clock form is converted by re-assembling the decimal seconds string,
/// so the result is the correctly rounded double of the written value.
pub fn parse_timestamp(text: &str) -> Option<f64> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    if !text.contains(':') {
        let v: f64 = text.parse().ok()?;
        return (v.is_finite() && v >= 0.0).then_some(v);
    }
    let parts: Vec<&str> = text.split(':').collect();
    let (h, m, s) = match parts.as_slice() {
        [h, m, s] => (*h, *m, *s),
        [m, s] => ("0", *m, *s),
        _ => return None,
    };
    let digits = |x: &str| !x.is_empty() && x.bytes().all(|b| b.is_ascii_digit());
    if !digits(h) || !digits(m) {
        return None;
    }
    let (s_int, s_frac) = match s.split_once('.') {
        Some((i, f)) => (i, f),
        None => (s, ""),
    };
    if !digits(s_int) || !(s_frac.is_empty() || digits(s_frac)) {
        return None;
    }
    let h: u64 = h.parse().ok()?;
    let m: u64 = m.parse().ok()?;
    let s_int: u64 = s_int.parse().ok()?;
    if m >= 60 || s_int >= 60 {
        return None;
    }
    let whole = h.checked_mul(3600)?.checked_add(m * 60 + s_int)?;
    if s_frac.is_empty() {
        Some(whole as f64)
    } else {
        format!("{whole}.{s_frac}").parse().ok()
    }
}

fn find_column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

fn line_of(rec: &csv::StringRecord) -> usize {
    rec.position().map_or(0, |p| p.line() as usize)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, row, format!("{other:?}")),
    }
}

pub fn parse_annotations(path: impl AsRef<Path>, vocab: &Vocabulary, opts: &ParseOptions) -> Result<Vec<VideoRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_annotations(file, path, vocab, opts)
}

/// Reads annotations from any reader; `source` names it in error messages.
pub fn read_annotations<R: Read>(
    reader: R,
    source: &Path,
    vocab: &Vocabulary,
    opts: &ParseOptions,
) -> Result<Vec<VideoRecord>> {
    if !(opts.horizon.is_finite() && opts.horizon > 0.0) {
        return Err(Error::Argument(format!(
            "horizon must be positive, got {}",
            opts.horizon
        )));
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = reader.headers().map_err(|e| csv_error(source, e))?.clone();
    let cols = &opts.columns;
    let required = |name: &str| {
        find_column(&headers, name).ok_or_else(|| Error::parse(source, 1, format!("missing required column '{name}'")))
    };
    let c_video = required(&cols.video_id)?;
    let c_start = required(&cols.start)?;
    let c_stop = required(&cols.stop)?;
    let c_verb = required(&cols.verb)?;
    let c_noun = required(&cols.noun)?;
    let c_duration = find_column(&headers, &cols.duration);

    let mut order: Vec<String> = Vec::new();
    let mut by_video: HashMap<String, (Vec<ActionInstance>, Option<f64>)> = HashMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(source, e))?;
        let row = line_of(&rec);
        let field = |c: usize| rec.get(c).unwrap_or("");
        let video = field(c_video).to_string();
        if video.is_empty() {
            return Err(Error::parse(source, row, "empty video id"));
        }
        let time = |c: usize, what: &str| {
            parse_timestamp(field(c))
                .ok_or_else(|| Error::parse(source, row, format!("malformed {what} timestamp '{}'", field(c))))
        };
        let start = time(c_start, "start")?;
        let stop = time(c_stop, "stop")?;
        let class = |c: usize, what: &str| {
            field(c)
                .parse::<u32>()
                .map_err(|_| Error::parse(source, row, format!("{what} class '{}' is not an integer", field(c))))
        };
        let verb = class(c_verb, "verb")?;
        let noun = class(c_noun, "noun")?;
        if stop <= start {
            return Err(Error::Validation(format!(
                "{}: row {row}: stop {stop} is not after start {start}",
                source.display()
            )));
        }
        let action = ActionInstance::new(video.clone(), start, stop, verb, noun, vocab)?;
        let duration = match c_duration.map(field).filter(|s| !s.is_empty()) {
            Some(text) => Some(
                parse_timestamp(text)
                    .filter(|d| *d > 0.0)
                    .ok_or_else(|| Error::parse(source, row, format!("malformed duration '{text}'")))?,
            ),
            None => None,
        };
        let entry = by_video.entry(video.clone()).or_insert_with(|| {
            order.push(video);
            (Vec::new(), None)
        });
        entry.0.push(action);
        if let Some(d) = duration {
            entry.1 = Some(entry.1.map_or(d, |e: f64| e.max(d)));
        }
    }

    order.sort();
    let mut out = Vec::with_capacity(order.len());
    for video in order {
        let (actions, column_duration) = by_video.remove(&video).unwrap_or_default();
        let supplied = opts
            .durations
            .as_ref()
            .and_then(|m| m.get(&video).copied())
            .or(column_duration);
        let record = match supplied {
            Some(d) => VideoRecord::new(video, d, actions)?,
            None => {
                let last_stop = actions.iter().map(|a| a.stop).fold(0.0, f64::max);
                let mut r = VideoRecord::new(video, last_stop + opts.horizon, actions)?;
                r.duration_inferred = true;
                r
            }
        };
        out.push(record);
    }
    Ok(out)
}

/// Reads a `video_id,duration` table (EPIC-KITCHENS `video_info` files work as is).
pub fn read_durations(path: impl AsRef<Path>) -> Result<HashMap<String, f64>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let c_video =
        find_column(&headers, "video_id").ok_or_else(|| Error::parse(path, 1, "missing 'video_id' column"))?;
    let c_dur = find_column(&headers, "duration").ok_or_else(|| Error::parse(path, 1, "missing 'duration' column"))?;
    let mut out = HashMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let text = rec.get(c_dur).unwrap_or("");
        let d = parse_timestamp(text)
            .filter(|d| *d > 0.0)
            .ok_or_else(|| Error::parse(path, line_of(&rec), format!("malformed duration '{text}'")))?;
        out.insert(rec.get(c_video).unwrap_or("").to_string(), d);
    }
    Ok(out)
}

/// Scans an annotation file for the largest verb and noun ids.
pub fn infer_vocabulary(path: impl AsRef<Path>, columns: &ColumnNames) -> Result<Vocabulary> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let col = |name: &str| {
        find_column(&headers, name).ok_or_else(|| Error::parse(path, 1, format!("missing required column '{name}'")))
    };
    let (c_verb, c_noun) = (col(&columns.verb)?, col(&columns.noun)?);
    let (mut verbs, mut nouns) = (0u32, 0u32);
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let id = |c: usize| {
            rec.get(c)
                .unwrap_or("")
                .parse::<u32>()
                .map_err(|_| Error::parse(path, line_of(&rec), "class id is not an integer"))
        };
        verbs = verbs.max(id(c_verb)? + 1);
        nouns = nouns.max(id(c_noun)? + 1);
    }
    Vocabulary::new(verbs.max(1), nouns.max(1))
}

/// Writes records in the format [`read_annotations`] accepts with default
/// column names. Inferred durations are left blank so they are re-inferred.
pub fn write_annotations<W: Write>(records: &[VideoRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let internal = |e: csv::Error| Error::Internal(e.to_string());
    w.write_record([
        "video_id",
        "start_timestamp",
        "stop_timestamp",
        "verb_class",
        "noun_class",
        "duration",
    ])
    .map_err(internal)?;
    for video in records {
        let duration = if video.duration_inferred {
            String::new()
        } else {
            video.duration.to_string()
        };
        for a in &video.actions {
            w.write_record([
                a.video_id.as_str(),
                &a.start.to_string(),
                &a.stop.to_string(),
                &a.verb_class.to_string(),
                &a.noun_class.to_string(),
                &duration,
            ])
            .map_err(internal)?;
        }
    }
    w.flush().map_err(|e| Error::Internal(e.to_string()))
}
