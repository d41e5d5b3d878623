//! The `uaa` command line: `evaluate`, `stats`, `perturb`, `adapt` and
//! `report`.
//!
//! Defaults can be overridden by a TOML file named with `--config` or the
//! `UAA_CONFIG` environment variable; command-line flags win over both.
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 internal error.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adapters::{self, ScoreFrame};
use crate::annotations::{self, ColumnNames, LabelKind, ParseOptions, VideoRecord, Vocabulary};
use crate::error::{Error, Result};
use crate::io::{read_predictions, write_predictions};
use crate::matching::{Delta, Prediction};
use crate::metrics::{self, EvalConfig, EvalOptions, EvalReport, MatchRecord};
use crate::perturb::{self, PerturbConfig};
use crate::windowing::{GridConfig, WindowSet, DEFAULT_ALPHA, DEFAULT_HORIZON};

pub const CONFIG_ENV: &str = "UAA_CONFIG";

#[derive(Debug, Parser)]
#[command(name = "uaa", version = crate::VERSION, about = "Untrimmed action anticipation benchmark tools")]
pub struct Cli {
    /// Upper bound on worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// TOML file with default settings (overrides $UAA_CONFIG).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score predictions against annotations.
    Evaluate(EvaluateArgs),
    /// Dataset statistics of the ground-truth windows.
    Stats(StatsArgs),
    /// Generate perturbed-ground-truth predictions.
    Perturb(PerturbArgs),
    /// Convert model score files into predictions.
    Adapt(AdaptArgs),
    /// Merge evaluation reports into a long-format mAP table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct AnnotationArgs {
    /// Annotation CSV.
    #[arg(long)]
    pub annotations: PathBuf,
    /// CSV with `video_id,duration` columns.
    #[arg(long)]
    pub durations: Option<PathBuf>,
    #[arg(long)]
    pub verb_classes: Option<u32>,
    #[arg(long)]
    pub noun_classes: Option<u32>,
    /// Verb class list (`id,key,...`); use with --noun-file.
    #[arg(long, requires = "noun_file")]
    pub verb_file: Option<PathBuf>,
    #[arg(long, requires = "verb_file")]
    pub noun_file: Option<PathBuf>,
    #[arg(long)]
    pub col_video: Option<String>,
    #[arg(long)]
    pub col_start: Option<String>,
    #[arg(long)]
    pub col_stop: Option<String>,
    #[arg(long)]
    pub col_verb: Option<String>,
    #[arg(long)]
    pub col_noun: Option<String>,
    #[arg(long)]
    pub col_duration: Option<String>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Grid step in seconds.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Anticipation horizon in seconds.
    #[arg(long)]
    pub horizon: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub annotations: AnnotationArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Prediction file (.csv or .jsonl).
    #[arg(long)]
    pub predictions: PathBuf,
    /// Comma-separated thresholds, `inf` for unbounded.
    #[arg(long, value_delimiter = ',')]
    pub deltas: Option<Vec<String>>,
    /// Comma-separated label spaces to score.
    #[arg(long, value_delimiter = ',')]
    pub space: Option<Vec<String>>,
    /// Label space of the prediction classes (default: the scored space, or
    /// action when several spaces are scored).
    #[arg(long)]
    pub pred_space: Option<String>,
    /// Snap off-grid prediction timestamps to the nearest grid point.
    #[arg(long)]
    pub snap: bool,
    /// Write per-prediction match diagnostics (CSV).
    #[arg(long)]
    pub dump_matches: Option<PathBuf>,
    /// Write per-class AP (CSV).
    #[arg(long)]
    pub per_class: Option<PathBuf>,
    /// Report destination (default stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub annotations: AnnotationArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub space: Option<String>,
    /// Dump every window as `video_id,t_a,class,tau`.
    #[arg(long)]
    pub windows_csv: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[command(flatten)]
    pub annotations: AnnotationArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Annotations for the class distribution (default: --annotations).
    #[arg(long)]
    pub train_annotations: Option<PathBuf>,
    #[arg(long)]
    pub p_swap: f64,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub space: Option<String>,
    /// Prediction file to write (.csv or .jsonl).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AdaptMode {
    Fixed,
    Multi5,
}

#[derive(Debug, Args)]
pub struct AdaptArgs {
    #[arg(long, value_enum, default_value_t = AdaptMode::Fixed)]
    pub mode: AdaptMode,
    /// Score files (.csv, .jsonl or .uaas); several allowed.
    #[arg(long, num_args = 1.., required = true)]
    pub scores: Vec<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Time-to-action assigned in fixed mode.
    #[arg(long)]
    pub tta: Option<f64>,
    /// Horizons expected in multi5 mode.
    #[arg(long, value_delimiter = ',')]
    pub horizons: Option<Vec<f64>>,
    /// Class count, required for sparse JSON scores.
    #[arg(long)]
    pub class_count: Option<usize>,
    /// Class index meaning "no action"; never emitted.
    #[arg(long)]
    pub no_action_class: Option<u32>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Evaluation report JSON files.
    #[arg(long, num_args = 1.., required = true)]
    pub reports: Vec<PathBuf>,
    /// CSV destination (default stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Defaults loaded from a TOML file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub alpha: Option<f64>,
    pub horizon: Option<f64>,
    pub deltas: Option<Vec<String>>,
    pub spaces: Option<Vec<String>>,
    pub threshold: Option<f64>,
    pub tta: Option<f64>,
    pub threads: Option<usize>,
    pub columns: Option<ColumnNames>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Provenance attached to every output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub started_unix_ms: u128,
    pub wall_ms: f64,
}

pub fn digest_file(path: &Path) -> Result<InputDigest> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut bytes = 0u64;
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        bytes += n as u64;
    }
    Ok(InputDigest {
        path: path.display().to_string(),
        bytes,
        sha256: hex::encode(hasher.finalize()),
    })
}

struct ManifestBuilder {
    command: &'static str,
    started: Instant,
    started_unix_ms: u128,
    inputs: Vec<PathBuf>,
}

impl ManifestBuilder {
    fn new(command: &'static str) -> Self {
        Self {
            command,
            started: Instant::now(),
            started_unix_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_millis()),
            inputs: Vec::new(),
        }
    }

    fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    fn finish(&self, config: impl Serialize) -> Result<RunManifest> {
        Ok(RunManifest {
            command: self.command.to_string(),
            tool_version: crate::VERSION.to_string(),
            config: serde_json::to_value(config).map_err(|e| Error::Internal(e.to_string()))?,
            inputs: self.inputs.iter().map(|p| digest_file(p)).collect::<Result<_>>()?,
            started_unix_ms: self.started_unix_ms,
            wall_ms: self.started.elapsed().as_secs_f64() * 1e3,
        })
    }
}

/// Sidecar manifest path of a CSV/prediction artifact.
pub fn manifest_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().map(OsString::from).unwrap_or_default();
    name.push(".manifest.json");
    artifact.with_file_name(name)
}

fn write_json(path: Option<&Path>, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    match path {
        Some(p) => std::fs::write(p, text + "\n").map_err(|e| Error::io(p, e)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn write_sidecar(artifact: &Path, manifest: &RunManifest) -> Result<()> {
    write_json(Some(&manifest_path(artifact)), manifest)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Settings after merging flags, the config file and built-in defaults.
struct Resolver {
    file: FileConfig,
}

impl Resolver {
    fn grid(&self, args: &GridArgs) -> Result<GridConfig> {
        GridConfig::new(
            args.alpha.or(self.file.alpha).unwrap_or(DEFAULT_ALPHA),
            args.horizon.or(self.file.horizon).unwrap_or(DEFAULT_HORIZON),
        )
    }

    fn columns(&self, args: &AnnotationArgs) -> ColumnNames {
        let mut c = self.file.columns.clone().unwrap_or_default();
        let set = |slot: &mut String, v: &Option<String>| {
            if let Some(v) = v {
                *slot = v.clone();
            }
        };
        set(&mut c.video_id, &args.col_video);
        set(&mut c.start, &args.col_start);
        set(&mut c.stop, &args.col_stop);
        set(&mut c.verb, &args.col_verb);
        set(&mut c.noun, &args.col_noun);
        set(&mut c.duration, &args.col_duration);
        c
    }

    fn deltas(&self, flag: &Option<Vec<String>>) -> Result<Vec<Delta>> {
        match flag.as_ref().or(self.file.deltas.as_ref()) {
            Some(list) => list
                .iter()
                .map(|s| s.parse::<Delta>().map_err(|e| Error::Usage(e.to_string())))
                .collect(),
            None => Ok(metrics::DEFAULT_DELTAS.to_vec()),
        }
    }
}

fn parse_space(s: &str) -> Result<LabelKind> {
    s.parse().map_err(|e: Error| Error::Usage(e.to_string()))
}

struct LoadedAnnotations {
    vocab: Vocabulary,
    videos: Vec<VideoRecord>,
}

fn load_annotations(
    args: &AnnotationArgs,
    path: &Path,
    resolver: &Resolver,
    grid: &GridConfig,
    manifest: &mut ManifestBuilder,
) -> Result<LoadedAnnotations> {
    let columns = resolver.columns(args);
    let vocab = match (&args.verb_file, &args.noun_file, args.verb_classes, args.noun_classes) {
        (Some(v), Some(n), _, _) => {
            manifest.input(v);
            manifest.input(n);
            Vocabulary::from_class_files(v, n)?
        }
        (_, _, Some(v), Some(n)) => Vocabulary::new(v, n)?,
        (_, _, None, None) => annotations::infer_vocabulary(path, &columns)?,
        _ => {
            return Err(Error::Usage(
                "--verb-classes and --noun-classes must be given together".into(),
            ))
        }
    };
    let durations = match &args.durations {
        Some(p) => {
            manifest.input(p);
            Some(annotations::read_durations(p)?)
        }
        None => None,
    };
    let opts = ParseOptions {
        columns,
        horizon: grid.horizon,
        durations,
    };
    manifest.input(path);
    let videos = annotations::parse_annotations(path, &vocab, &opts)?;
    Ok(LoadedAnnotations { vocab, videos })
}

/// Parses arguments and runs one command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let config_path = cli
        .config
        .clone()
        .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    let file = match config_path {
        Some(p) => FileConfig::load(&p)?,
        None => FileConfig::default(),
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads.or(file.threads) {
        if n == 0 {
            return Err(Error::Usage("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Internal(e.to_string()))?;
    let resolver = Resolver { file };
    pool.install(|| match &cli.command {
        Command::Evaluate(a) => cmd_evaluate(a, &resolver),
        Command::Stats(a) => cmd_stats(a, &resolver),
        Command::Perturb(a) => cmd_perturb(a, &resolver),
        Command::Adapt(a) => cmd_adapt(a, &resolver),
        Command::Report(a) => cmd_report(a),
    })
}

#[derive(Serialize)]
struct EvaluateSettings<'a> {
    alpha: f64,
    horizon: f64,
    deltas: &'a [Delta],
    spaces: &'a [LabelKind],
    pred_space: LabelKind,
    snap: bool,
}

fn cmd_evaluate(args: &EvaluateArgs, resolver: &Resolver) -> Result<()> {
    let mut manifest = ManifestBuilder::new("evaluate");
    let grid = resolver.grid(&args.grid)?;
    let deltas = resolver.deltas(&args.deltas)?;
    let spaces: Vec<LabelKind> = match args.space.as_ref().or(resolver.file.spaces.as_ref()) {
        Some(list) => list.iter().map(|s| parse_space(s)).collect::<Result<_>>()?,
        None => vec![LabelKind::Action],
    };
    let pred_space = match &args.pred_space {
        Some(s) => parse_space(s)?,
        None if spaces.len() == 1 => spaces[0],
        None => LabelKind::Action,
    };
    if pred_space != LabelKind::Action && spaces.iter().any(|&s| s != pred_space) {
        return Err(Error::Usage(format!(
            "{pred_space} predictions can only be scored in the {pred_space} space"
        )));
    }
    let data = load_annotations(
        &args.annotations,
        &args.annotations.annotations,
        resolver,
        &grid,
        &mut manifest,
    )?;
    manifest.input(&args.predictions);
    let preds = read_predictions(&args.predictions)?;
    let config = EvalConfig {
        grid,
        deltas: deltas.clone(),
        space: spaces[0],
        snap: args.snap,
    };
    let opts = EvalOptions {
        collect_matches: args.dump_matches.is_some(),
        keep_curves: false,
    };
    let output = if spaces == [pred_space] {
        metrics::evaluate_with(&data.videos, &data.vocab, &preds, &config, opts)?
    } else {
        metrics::evaluate_spaces(&data.videos, &data.vocab, &preds, &config, &spaces, opts)?
    };
    let mut report = output.report;
    let settings = EvaluateSettings {
        alpha: grid.alpha,
        horizon: grid.horizon,
        deltas: &deltas,
        spaces: &spaces,
        pred_space,
        snap: args.snap,
    };
    let run = manifest.finish(&settings)?;
    let sidecar = manifest_path(&args.predictions);
    if sidecar.exists() {
        let text = std::fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        report.predictions_manifest = serde_json::from_str(&text).ok();
    }
    if let Some(path) = &args.dump_matches {
        write_matches(path, &output.matches)?;
        write_sidecar(path, &run)?;
    }
    if let Some(path) = &args.per_class {
        write_per_class(path, &report)?;
        write_sidecar(path, &run)?;
    }
    report.manifest = Some(serde_json::to_value(&run).map_err(|e| Error::Internal(e.to_string()))?);
    eprint!("{}", report.summary());
    write_json(args.out.as_deref(), &report)
}

fn write_matches(path: &Path, matches: &[MatchRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for m in matches {
        w.serialize(m).map_err(|e| Error::Internal(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_per_class(path: &Path, report: &EvalReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let internal = |e: csv::Error| Error::Internal(e.to_string());
    w.write_record([
        "space",
        "delta",
        "class",
        "gt_count",
        "predictions",
        "true_positives",
        "ap",
    ])
    .map_err(internal)?;
    for s in &report.spaces {
        for r in &s.results {
            for c in &r.classes {
                w.write_record([
                    s.space.to_string(),
                    r.delta.to_string(),
                    c.class_id.to_string(),
                    c.gt_count.to_string(),
                    c.predictions.to_string(),
                    c.true_positives.to_string(),
                    c.ap.map(|a| a.to_string()).unwrap_or_default(),
                ])
                .map_err(internal)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// JSON document written by `stats`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatsDocument {
    pub schema_version: u32,
    pub space: LabelKind,
    pub alpha: f64,
    pub horizon: f64,
    pub grid_start: String,
    pub window_rule: String,
    pub videos: u64,
    pub inferred_durations: u64,
    #[serde(flatten)]
    pub stats: crate::windowing::StatsReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
}

fn cmd_stats(args: &StatsArgs, resolver: &Resolver) -> Result<()> {
    let mut manifest = ManifestBuilder::new("stats");
    let grid = resolver.grid(&args.grid)?;
    let space = args
        .space
        .as_deref()
        .map(parse_space)
        .transpose()?
        .unwrap_or(LabelKind::Action);
    let data = load_annotations(
        &args.annotations,
        &args.annotations.annotations,
        resolver,
        &grid,
        &mut manifest,
    )?;
    let windows = WindowSet::build(&data.videos, &grid, space)?;
    let stats = windows.stats()?;
    let run = manifest.finish(serde_json::json!({
        "alpha": grid.alpha,
        "horizon": grid.horizon,
        "space": space,
    }))?;
    if let Some(path) = &args.windows_csv {
        let mut w = create(path)?;
        windows.write_csv(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))?;
        write_sidecar(path, &run)?;
    }
    let doc = StatsDocument {
        schema_version: metrics::SCHEMA_VERSION,
        space,
        alpha: grid.alpha,
        horizon: grid.horizon,
        grid_start: "first timestamp at alpha".into(),
        window_rule: "0 < start - t <= horizon".into(),
        videos: data.videos.len() as u64,
        inferred_durations: windows.inferred_durations() as u64,
        stats,
        manifest: Some(run),
    };
    write_json(args.out.as_deref(), &doc)
}

fn cmd_perturb(args: &PerturbArgs, resolver: &Resolver) -> Result<()> {
    let mut manifest = ManifestBuilder::new("perturb");
    let grid = resolver.grid(&args.grid)?;
    let space = args
        .space
        .as_deref()
        .map(parse_space)
        .transpose()?
        .unwrap_or(LabelKind::Action);
    let cfg = PerturbConfig::new(args.p_swap, args.sigma, args.seed)?;
    let data = load_annotations(
        &args.annotations,
        &args.annotations.annotations,
        resolver,
        &grid,
        &mut manifest,
    )?;
    let windows = WindowSet::build(&data.videos, &grid, space)?;
    let edf = match &args.train_annotations {
        Some(train) => {
            let train_data = load_annotations(&args.annotations, train, resolver, &grid, &mut manifest)?;
            if train_data.vocab != data.vocab {
                return Err(Error::Validation(
                    "training and evaluation annotations use different vocabularies; pass --verb-classes/--noun-classes".into(),
                ));
            }
            perturb::build_edf(&WindowSet::build(&train_data.videos, &grid, space)?)?
        }
        None => perturb::build_edf(&windows)?,
    };
    let preds = perturb::perturb_windows(&windows, &edf, &cfg)?;
    write_predictions(&args.out, &preds)?;
    let run = manifest.finish(serde_json::json!({
        "p_swap": cfg.p_swap,
        "sigma": cfg.sigma,
        "seed": cfg.seed,
        "space": space,
        "alpha": grid.alpha,
        "horizon": grid.horizon,
        "rng": "ChaCha8, class stream 0, time stream 1",
    }))?;
    write_sidecar(&args.out, &run)
}

fn cmd_adapt(args: &AdaptArgs, resolver: &Resolver) -> Result<()> {
    let mut manifest = ManifestBuilder::new("adapt");
    let threshold = args
        .threshold
        .or(resolver.file.threshold)
        .unwrap_or(adapters::DEFAULT_THRESHOLD);
    let tta = args.tta.or(resolver.file.tta).unwrap_or(adapters::DEFAULT_FIXED_TTA);
    let mut frames: Vec<ScoreFrame> = Vec::new();
    for path in &args.scores {
        manifest.input(path);
        frames.extend(adapters::read_score_frames(path, args.class_count)?);
    }
    let preds: Vec<Prediction> = match args.mode {
        AdaptMode::Fixed => adapters::adapt_fixed_tta_excluding(&frames, threshold, tta, args.no_action_class)?,
        AdaptMode::Multi5 => {
            let expected = args
                .horizons
                .clone()
                .unwrap_or_else(|| adapters::DEFAULT_HORIZONS.to_vec());
            let sets = adapters::group_by_horizon(frames);
            let found: Vec<f64> = sets.iter().map(|s| s[0].horizon).collect();
            let mut want = expected.clone();
            want.sort_by(f64::total_cmp);
            if found != want {
                return Err(Error::Alignment(format!(
                    "score files cover horizons {found:?}, expected {want:?}"
                )));
            }
            let mut preds = adapters::adapt_multi_horizon(&sets, threshold)?;
            if let Some(skip) = args.no_action_class {
                preds.retain(|p| p.class_id != skip);
            }
            preds
        }
    };
    write_predictions(&args.out, &preds)?;
    let run = manifest.finish(serde_json::json!({
        "mode": format!("{:?}", args.mode).to_lowercase(),
        "threshold": threshold,
        "tta": tta,
        "horizons": args.horizons,
        "no_action_class": args.no_action_class,
    }))?;
    write_sidecar(&args.out, &run)
}

/// One row of the `report` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub source: String,
    pub space: LabelKind,
    pub p_swap: Option<f64>,
    pub sigma: Option<f64>,
    pub seed: Option<u64>,
    pub delta: String,
    pub map: Option<f64>,
}

/// Flattens reports into `(configuration, delta, mAP)` rows.
pub fn report_rows(reports: &[(String, EvalReport)]) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    for (source, report) in reports {
        let params: HashMap<&str, &serde_json::Value> = report
            .predictions_manifest
            .as_ref()
            .and_then(|m| m.get("config"))
            .and_then(|c| c.as_object())
            .map(|o| o.iter().map(|(k, v)| (k.as_str(), v)).collect())
            .unwrap_or_default();
        for space in &report.spaces {
            for r in &space.results {
                rows.push(ReportRow {
                    source: source.clone(),
                    space: space.space,
                    p_swap: params.get("p_swap").and_then(|v| v.as_f64()),
                    sigma: params.get("sigma").and_then(|v| v.as_f64()),
                    seed: params.get("seed").and_then(|v| v.as_u64()),
                    delta: r.delta.to_string(),
                    map: r.map,
                });
            }
        }
    }
    rows
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let mut manifest = ManifestBuilder::new("report");
    let mut reports = Vec::with_capacity(args.reports.len());
    for path in &args.reports {
        manifest.input(path);
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let report: EvalReport =
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
        if report.schema_version != metrics::SCHEMA_VERSION {
            return Err(Error::Validation(format!(
                "{}: unsupported report schema {}",
                path.display(),
                report.schema_version
            )));
        }
        reports.push((path.display().to_string(), report));
    }
    let rows = report_rows(&reports);
    let sink: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    for row in &rows {
        w.serialize(row).map_err(|e| Error::Internal(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Internal(e.to_string()))?;
    drop(w);
    if let Some(p) = &args.out {
        write_sidecar(p, &manifest.finish(serde_json::json!({ "reports": args.reports }))?)?;
    }
    Ok(())
}
