//! Prediction files: CSV (`video_id,t,class,tta,score`) or JSON lines with
//! the same keys. The format follows the file extension.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matching::Prediction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionFormat {
    Csv,
    JsonLines,
}

impl PredictionFormat {
    pub fn from_path(path: &Path) -> Self {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("jsonl" | "json" | "ndjson") => PredictionFormat::JsonLines,
            _ => PredictionFormat::Csv,
        }
    }
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<Prediction>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_predictions_from(BufReader::new(file), path, PredictionFormat::from_path(path))
}

pub fn read_predictions_from<R: Read>(reader: R, source: &Path, format: PredictionFormat) -> Result<Vec<Prediction>> {
    let mut out = Vec::new();
    match format {
        PredictionFormat::Csv => {
            let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
            for rec in rdr.deserialize::<Prediction>() {
                let p = rec.map_err(|e| {
                    let row = e.position().map_or(0, |p| p.line() as usize);
                    Error::parse(source, row, e.to_string())
                })?;
                out.push(p);
            }
        }
        PredictionFormat::JsonLines => {
            for (i, line) in BufReader::new(reader).lines().enumerate() {
                let line = line.map_err(|e| Error::io(source, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let p: Prediction =
                    serde_json::from_str(&line).map_err(|e| Error::parse(source, i + 1, e.to_string()))?;
                out.push(p);
            }
        }
    }
    Ok(out)
}

pub fn write_predictions(path: impl AsRef<Path>, preds: &[Prediction]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_predictions_to(&mut w, preds, PredictionFormat::from_path(path))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_predictions_to<W: Write>(writer: W, preds: &[Prediction], format: PredictionFormat) -> Result<()> {
    match format {
        PredictionFormat::Csv => {
            let mut w = csv::Writer::from_writer(writer);
            for p in preds {
                w.serialize(p).map_err(|e| Error::Internal(e.to_string()))?;
            }
            w.flush().map_err(|e| Error::Internal(e.to_string()))
        }
        PredictionFormat::JsonLines => {
            let mut writer = writer;
            for p in preds {
                serde_json::to_writer(&mut writer, p).map_err(|e| Error::Internal(e.to_string()))?;
                writer.write_all(b"\n").map_err(|e| Error::Internal(e.to_string()))?;
            }
            Ok(())
        }
    }
}
