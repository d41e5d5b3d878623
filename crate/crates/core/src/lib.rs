//! Evaluation harness for untrimmed action anticipation.
//!
//! At every grid timestamp of a video a model predicts the set of actions
//! starting within the anticipation horizon, each with a class, a
//! time-to-action and a confidence. Predictions are matched to ground truth
//! by class and temporal offset and scored with 11-point interpolated mAP
//! at several offset thresholds.
//!
//! Module map:
//!
//! * [`annotations`] - label vocabularies, action records, CSV ingestion
//! * [`windowing`] - timestamp grid, ground-truth windows, dataset statistics
//! * [`matching`] - greedy temporal-offset matching
//! * [`metrics`] - PR curves, interpolated AP, `evaluate`
//! * [`reference`] - brute-force AP oracle for small instances
//! * [`perturb`] - perturbed-ground-truth baselines
//! * [`adapters`] - score files of trimmed models to predictions
//! * [`cli`] - the `uaa` command line

pub mod adapters;
pub mod annotations;
pub mod cli;
pub mod error;
pub mod io;
pub mod matching;
pub mod metrics;
pub mod perturb;
pub mod reference;
pub mod synth;
pub mod windowing;

pub use annotations::{ActionInstance, LabelKind, LabelSpace, VideoRecord, Vocabulary};
pub use error::{Error, Result};
pub use matching::{Delta, MatchResult, Prediction};
pub use metrics::{evaluate, EvalConfig, EvalReport};
pub use windowing::{GridConfig, GroundTruthWindow, WindowSet};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
