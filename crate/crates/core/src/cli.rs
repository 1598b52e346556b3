//! Command-line interface: `convert`, `linearize`, `train`, `parse`,
//! `eval` and `bench`.
//!
//! Exit codes: 0 on success, 1 for invalid input or flags, 2 for I/O
//! failures.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::convert::{from_arbor, to_arbor, ConvertError, SenseTable};
use crate::data::{attach_external, prepare, Example};
use crate::eval::{
    default_functional_labels, labeled_triple_f1, smatch_score, speed_bench, validity_audit, AuditReport, EvalError,
    F1Report, SmatchMode, SmatchOptions, SpeedReport,
};
use crate::graph::{Framework, SemanticGraph};
use crate::inference::{parse, DecodeOptions, ParseError};
use crate::io::embeddings::read_external_embeddings;
use crate::io::{
    load_embeddings, read_arbor_records, read_canonical, read_penman_corpus, read_sdp_corpus, write_arbor_records,
    write_canonical, write_penman, write_sdp, ArborRecord, CanonicalGraphRecord, FormatError, SdpSentence, SdpToken,
};
use crate::linearize::{arbor_to_relations, write_relations_tsv, LinearizeError, OrderingPolicy};
use crate::model::{EncoderInput, Model, ModelConfig, ModelError};
use crate::train::{build_model, train, TrainConfig, TrainError};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Io { .. } => 2,
        }
    }

    fn invalid(e: impl std::fmt::Display) -> Self {
        CliError::Invalid(e.to_string())
    }
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Maps library errors to exit classes, keeping I/O failures apart.
trait Classify<T> {
    fn at(self, path: &Path) -> Result<T, CliError>;
}

fn format_error(path: &Path, e: FormatError) -> CliError {
    match e {
        FormatError::Io(source) => io_error(path, source),
        other => CliError::Invalid(format!("{}: {other}", path.display())),
    }
}

fn model_error(path: &Path, e: ModelError) -> CliError {
    match e {
        ModelError::Format(f) => format_error(path, f),
        other => CliError::invalid(other),
    }
}

impl<T> Classify<T> for Result<T, FormatError> {
    fn at(self, path: &Path) -> Result<T, CliError> {
        self.map_err(|e| format_error(path, e))
    }
}

impl<T> Classify<T> for Result<T, ModelError> {
    fn at(self, path: &Path) -> Result<T, CliError> {
        self.map_err(|e| model_error(path, e))
    }
}

impl From<ConvertError> for CliError {
    fn from(e: ConvertError) -> Self {
        CliError::invalid(e)
    }
}

impl From<LinearizeError> for CliError {
    fn from(e: LinearizeError) -> Self {
        CliError::invalid(e)
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::invalid(e)
    }
}

impl From<ParseError> for CliError {
    fn from(e: ParseError) -> Self {
        CliError::invalid(e)
    }
}

#[derive(Debug, Parser)]
#[command(name = "arbor", version, about = "Semantic graph conversion, training and parsing")]
pub struct Cli {
    /// Worker threads for training, parsing and evaluation.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert framework graphs to arborescences or back.
    Convert(ConvertArgs),
    /// Write the relation sequence of each arborescence as TSV.
    Linearize(LinearizeArgs),
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Parse sentences with a trained model.
    Parse(ParseArgs),
    /// Score predicted graphs against gold graphs.
    Eval(EvalArgs),
    /// Measure decoding speed.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GraphFormat {
    Penman,
    Sdp,
    Canonical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Direction {
    ToArbor,
    FromArbor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SentenceFormat {
    /// One whitespace-tokenized sentence per line.
    Text,
    /// Canonical JSON-lines records; graphs are ignored.
    Canonical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Full-size settings per framework.
    Full,
    /// Small network for CPU experiments.
    Scaled,
    /// Minimal sizes for smoke tests.
    Tiny,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Policy {
    Alphanumeric,
    Surface,
    Source,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long)]
    pub framework: Option<Framework>,
    #[arg(long, value_enum)]
    pub direction: Direction,
    #[arg(long)]
    pub input: PathBuf,
    /// Standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Graph file format (read for to-arbor, written for from-arbor).
    #[arg(long, value_enum, default_value = "canonical")]
    pub format: GraphFormat,
}

#[derive(Debug, Args)]
pub struct LinearizeArgs {
    /// Arborescence JSON lines.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Child order; the framework default when omitted.
    #[arg(long, value_enum)]
    pub policy: Option<Policy>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "canonical")]
    pub format: GraphFormat,
    /// Keep only records of this framework; required for mixed corpora.
    #[arg(long)]
    pub framework: Option<Framework>,
    /// TOML file with `[model]` and `[train]` tables.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "full")]
    pub preset: Preset,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Per-epoch JSON lines.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Word vectors, one `word v1 ... vd` line each.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Per-sentence contextual vectors keyed by record id.
    #[arg(long)]
    pub external: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub label_smoothing: Option<f64>,
    #[arg(long)]
    pub coverage_weight: Option<f64>,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub target_f1: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long, default_value_t = 5)]
    pub beam_size: usize,
    /// Same as `--beam-size 1`.
    #[arg(long)]
    pub greedy: bool,
    #[arg(long, default_value_t = 100)]
    pub max_len: usize,
    /// Rank finished beam hypotheses by score per relation.
    #[arg(long)]
    pub len_norm: bool,
}

impl DecodeArgs {
    fn options(&self) -> DecodeOptions {
        DecodeOptions {
            max_len: self.max_len,
            min_len: 0,
            beam_size: if self.greedy { 1 } else { self.beam_size.max(1) },
            length_norm: self.len_norm,
        }
    }
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    pub input_format: SentenceFormat,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "canonical")]
    pub format: GraphFormat,
    #[arg(long)]
    pub external: Option<PathBuf>,
    #[command(flatten)]
    pub decode: DecodeArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, value_enum, default_value = "canonical")]
    pub format: GraphFormat,
    /// Exhaustive Smatch mapping (at most 10 variables).
    #[arg(long)]
    pub exact: bool,
    /// Leave TOP triples out of Smatch.
    #[arg(long)]
    pub no_top: bool,
    /// Comma-separated labels a node may use at most once.
    #[arg(long, value_delimiter = ',')]
    pub functional: Option<Vec<String>>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    pub input_format: SentenceFormat,
    #[arg(long, default_value_t = 5)]
    pub beam_size: usize,
    #[arg(long, default_value_t = 100)]
    pub max_len: usize,
    /// Forced output lengths for the linearity fit.
    #[arg(long, value_delimiter = ',', default_value = "5,10,20,30,40,50,60,70,80")]
    pub lengths: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Parses arguments, runs the command and returns the exit code.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ARBOR_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::invalid("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(CliError::invalid)?;
    }
    match cli.command {
        Command::Convert(a) => convert(&a),
        Command::Linearize(a) => linearize(&a),
        Command::Train(a) => train_command(&a),
        Command::Parse(a) => parse_command(&a),
        Command::Eval(a) => eval_command(&a),
        Command::Bench(a) => bench_command(&a),
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| io_error(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| io_error(Path::new("<stdout>"), e))
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Reads graph records in any supported format. Records of a framework
/// other than `framework` are an error.
pub fn read_graphs(path: &Path, format: GraphFormat, framework: Option<Framework>) -> Result<Vec<CanonicalGraphRecord>, CliError> {
    let text = read_text(path)?;
    let records: Vec<CanonicalGraphRecord> = match format {
        GraphFormat::Penman => read_penman_corpus(&text)
            .at(path)?
            .into_iter()
            .enumerate()
            .map(|(k, g)| CanonicalGraphRecord::from_graph(format!("{}", k + 1), Vec::new(), Vec::new(), g))
            .collect(),
        GraphFormat::Sdp => read_sdp_corpus(&text)
            .at(path)?
            .into_iter()
            .enumerate()
            .map(|(k, s)| {
                let mut r = CanonicalGraphRecord::from_graph(
                    s.id.clone().unwrap_or_else(|| format!("{}", k + 1)),
                    s.tokens.iter().map(|t| t.form.clone()).collect(),
                    s.tokens.iter().map(|t| t.pos.clone()).collect(),
                    s.graph,
                );
                r.features
                    .insert("lemma".into(), s.tokens.iter().map(|t| t.lemma.clone()).collect());
                r
            })
            .collect(),
        GraphFormat::Canonical => {
            let records = read_canonical(&text).at(path)?;
            for r in &records {
                r.check().at(path)?;
            }
            records
        }
    };
    if let Some(fw) = framework {
        if let Some(bad) = records.iter().find(|r| r.framework != fw) {
            return Err(CliError::Invalid(format!(
                "{}: record `{}` is {}, expected {fw}",
                path.display(),
                bad.id,
                bad.framework
            )));
        }
    }
    Ok(records)
}

/// Keeps the nodes an SDP file can hold: one token anchor each, at most
/// one edge per token pair.
fn sdp_sentence(r: &CanonicalGraphRecord) -> SdpSentence {
    let mut g = r.graph();
    let n = r.tokens.len();
    let before = g.nodes.len();
    g.nodes
        .retain(|node| matches!(node.anchors.as_slice(), [s] if s.to == s.from + 1 && s.from < n));
    if g.nodes.len() < before {
        warn!("record {}: dropped {} nodes without a single token anchor", r.id, before - g.nodes.len());
    }
    let token: HashMap<String, usize> = g.nodes.iter().map(|n| (n.id.clone(), n.anchors[0].from)).collect();
    let mut pairs = std::collections::HashSet::new();
    g.edges.retain(|e| match (token.get(&e.source), token.get(&e.target)) {
        (Some(a), Some(b)) => pairs.insert((*a, *b)),
        _ => false,
    });
    g.tops.retain(|t| token.contains_key(t));
    // Node labels fill the lemma column; other tokens keep their lemma.
    let mut lemmas: Vec<String> = r.features.get("lemma").cloned().unwrap_or_else(|| r.tokens.clone());
    for node in &g.nodes {
        lemmas[node.anchors[0].from] = node.label.clone();
    }
    let tokens = r
        .tokens
        .iter()
        .enumerate()
        .map(|(i, form)| SdpToken {
            form: form.clone(),
            lemma: lemmas[i].clone(),
            pos: r.pos.get(i).cloned().unwrap_or_else(|| "_".into()),
        })
        .collect();
    SdpSentence {
        id: Some(r.id.clone()),
        tokens,
        graph: g,
    }
}

pub fn write_graphs(records: &[CanonicalGraphRecord], format: GraphFormat) -> Result<String, CliError> {
    match format {
        GraphFormat::Canonical => write_canonical(records).map_err(CliError::invalid),
        GraphFormat::Penman => {
            let mut out = String::new();
            for r in records {
                out.push_str(&format!("# ::id {}\n", r.id));
                if !r.tokens.is_empty() {
                    out.push_str(&format!("# ::tok {}\n", r.tokens.join(" ")));
                }
                if !r.nodes.is_empty() {
                    out.push_str(&write_penman(&r.graph()).map_err(CliError::invalid)?);
                    out.push('\n');
                }
                out.push('\n');
            }
            Ok(out)
        }
        GraphFormat::Sdp => {
            let mut out = String::new();
            for r in records {
                out.push_str(&write_sdp(&sdp_sentence(r)).map_err(CliError::invalid)?);
                out.push('\n');
            }
            Ok(out)
        }
    }
}

fn convert(a: &ConvertArgs) -> Result<(), CliError> {
    let text = match a.direction {
        Direction::ToArbor => {
            let records = read_graphs(&a.input, a.format, a.framework)?;
            let arbors = records
                .iter()
                .map(|r| {
                    let tree = to_arbor(&r.graph()).map_err(|e| CliError::Invalid(format!("record {}: {e}", r.id)))?;
                    Ok(ArborRecord {
                        id: r.id.clone(),
                        framework: r.framework,
                        tokens: r.tokens.clone(),
                        root: tree.root,
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            write_arbor_records(&arbors).map_err(CliError::invalid)?
        }
        Direction::FromArbor => {
            let arbors = read_arbor_records(&read_text(&a.input)?).at(&a.input)?;
            let records = arbors
                .iter()
                .map(|r| {
                    let framework = a.framework.unwrap_or(r.framework);
                    let g = from_arbor(&r.arborescence(), framework)
                        .map_err(|e| CliError::Invalid(format!("record {}: {e}", r.id)))?;
                    Ok(CanonicalGraphRecord::from_graph(r.id.clone(), r.tokens.clone(), Vec::new(), g))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            write_graphs(&records, a.format)?
        }
    };
    write_output(a.output.as_deref(), &text)
}

fn linearize(a: &LinearizeArgs) -> Result<(), CliError> {
    let arbors = read_arbor_records(&read_text(&a.input)?).at(&a.input)?;
    let seqs: Vec<_> = arbors
        .iter()
        .map(|r| {
            let policy = match a.policy {
                Some(Policy::Alphanumeric) => OrderingPolicy::Alphanumeric,
                Some(Policy::Surface) => OrderingPolicy::SurfaceOrder,
                Some(Policy::Source) => OrderingPolicy::SourceOrder,
                None => OrderingPolicy::for_framework(r.framework),
            };
            arbor_to_relations(&r.arborescence(), policy)
        })
        .collect();
    write_output(a.output.as_deref(), &write_relations_tsv(&seqs))
}

/// Overlays `table` onto the serialized `base`, rejecting unknown keys.
fn overlay<T>(base: &T, table: Option<&toml::Value>, section: &str) -> Result<T, CliError>
where
    T: Serialize + serde::de::DeserializeOwned,
{
    let mut merged = toml::Value::try_from(base).map_err(CliError::invalid)?;
    if let Some(t) = table {
        let t = t
            .as_table()
            .ok_or_else(|| CliError::Invalid(format!("config: `{section}` must be a table")))?;
        let m = merged.as_table_mut().expect("structs serialize to tables");
        for (k, v) in t {
            if !m.contains_key(k) && !(section == "train" && k == "target_f1") {
                return Err(CliError::Invalid(format!("config: unknown key `{section}.{k}`")));
            }
            m.insert(k.clone(), v.clone());
        }
    }
    merged
        .try_into()
        .map_err(|e| CliError::Invalid(format!("config `{section}`: {e}")))
}

/// Model and training settings: flags over the config file over presets.
pub fn resolve_config(a: &TrainArgs, framework: Framework) -> Result<(ModelConfig, TrainConfig), CliError> {
    let file: BTreeMap<String, toml::Value> = match &a.config {
        Some(p) => toml::from_str(&read_text(p)?).map_err(|e| CliError::Invalid(format!("{}: {e}", p.display())))?,
        None => BTreeMap::new(),
    };
    if let Some(k) = file.keys().find(|k| *k != "model" && *k != "train") {
        return Err(CliError::Invalid(format!("config: unknown table `{k}`")));
    }
    let preset = match a.preset {
        Preset::Full => ModelConfig::for_framework(framework),
        Preset::Scaled => ModelConfig::scaled(framework),
        Preset::Tiny => ModelConfig::tiny(framework),
    };
    let mut model: ModelConfig = overlay(&preset, file.get("model"), "model")?;
    model.framework = framework;
    let mut t: TrainConfig = overlay(&TrainConfig::default(), file.get("train"), "train")?;
    if let Some(v) = a.seed {
        t.seed = v;
    }
    if let Some(v) = a.epochs {
        t.epochs = v;
    }
    if let Some(v) = a.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = a.lr {
        t.learning_rate = v;
    }
    if let Some(v) = a.patience {
        t.patience = v;
    }
    if let Some(v) = a.label_smoothing {
        t.label_smoothing = v;
    }
    if let Some(v) = a.coverage_weight {
        t.coverage_weight = v;
    }
    if let Some(v) = a.max_len {
        t.max_len = v;
    }
    if a.target_f1.is_some() {
        t.target_f1 = a.target_f1;
    }
    model.validate().map_err(CliError::invalid)?;
    t.validate().map_err(CliError::Invalid)?;
    Ok((model, t))
}

fn examples_for(path: &Path, format: GraphFormat, framework: Framework, senses: &mut SenseTable) -> Result<Vec<Example>, CliError> {
    let records = read_graphs(path, format, None)?;
    let records: Vec<_> = records.into_iter().filter(|r| r.framework == framework).collect();
    prepare(&records, senses).map_err(|(id, e)| CliError::Invalid(format!("{}: record {id}: {e}", path.display())))
}

fn train_command(a: &TrainArgs) -> Result<(), CliError> {
    let framework = match a.framework {
        Some(f) => f,
        None => {
            let records = read_graphs(&a.train, a.format, None)?;
            let first = records
                .first()
                .ok_or_else(|| CliError::Invalid(format!("{}: no records", a.train.display())))?
                .framework;
            if records.iter().any(|r| r.framework != first) {
                return Err(CliError::Invalid(
                    "training corpus mixes frameworks; choose one with --framework".into(),
                ));
            }
            first
        }
    };
    let (model_cfg, cfg) = resolve_config(a, framework)?;
    let mut senses = SenseTable::default();
    let mut train_set = examples_for(&a.train, a.format, framework, &mut senses)?;
    if train_set.is_empty() {
        return Err(CliError::Invalid(format!("{}: no {framework} records", a.train.display())));
    }
    let mut dev_set = match &a.dev {
        Some(p) => examples_for(p, a.format, framework, &mut SenseTable::default())?,
        None => Vec::new(),
    };
    if let Some(p) = &a.external {
        let vectors = read_external_embeddings(&read_text(p)?, model_cfg.external_dim).at(p)?;
        for set in [&mut train_set, &mut dev_set] {
            let missing = attach_external(set, &vectors);
            if let Some(id) = missing.first() {
                return Err(CliError::Invalid(format!("{}: no vectors for record `{id}`", p.display())));
            }
        }
    }
    let mut model = build_model(&train_set, model_cfg, cfg.seed).map_err(CliError::invalid)?;
    if let Some(p) = &a.embeddings {
        let table = load_embeddings(p, model.config.word_dim).at(p)?;
        let found = model.load_word_vectors(&table).at(p)?;
        info!("initialized {found} word vectors from {}", p.display());
    }
    info!(
        "{} training and {} dev examples, {} parameters",
        train_set.len(),
        dev_set.len(),
        model.params.scalar_count()
    );
    let mut metrics_file = match &a.metrics {
        Some(p) => Some(BufWriter::new(File::create(p).map_err(|e| io_error(p, e))?)),
        None => None,
    };
    let ckpt = a.checkpoint.clone();
    let mut save = |m: &Model| -> Result<(), TrainError> {
        m.save(&ckpt).map_err(TrainError::Model)
    };
    let result = train(
        &mut model,
        &train_set,
        &dev_set,
        &cfg,
        metrics_file.as_mut().map(|w| w as &mut dyn Write),
        Some(&mut save),
    );
    let report = result.map_err(|e| match e {
        TrainError::Io(source) => io_error(a.metrics.as_deref().unwrap_or(Path::new("<metrics>")), source),
        TrainError::Model(m) => model_error(&a.checkpoint, m),
        other => CliError::invalid(other),
    })?;
    if let Some(w) = metrics_file.as_mut() {
        w.flush().map_err(|e| io_error(a.metrics.as_deref().expect("metrics path"), e))?;
    }
    model.save(&a.checkpoint).at(&a.checkpoint)?;
    #[derive(Serialize)]
    struct Summary {
        framework: Framework,
        epochs: usize,
        best_epoch: usize,
        best_dev_f1: Option<f64>,
        checkpoint: PathBuf,
    }
    write_output(
        None,
        &to_json(&Summary {
            framework,
            epochs: report.epochs.len(),
            best_epoch: report.best_epoch,
            best_dev_f1: report.best_dev_f1,
            checkpoint: a.checkpoint.clone(),
        }),
    )
}

/// Sentences with ids. Text lines get ids `1`, `2`, ...; feature columns
/// the model expects are filled with the lowercased tokens.
pub fn read_sentences(path: &Path, format: SentenceFormat, model: &Model) -> Result<Vec<(String, EncoderInput)>, CliError> {
    let text = read_text(path)?;
    let mut out: Vec<(String, EncoderInput)> = match format {
        SentenceFormat::Text => text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(k, l)| (format!("{}", k + 1), EncoderInput::new(l.split_whitespace().map(String::from).collect())))
            .collect(),
        SentenceFormat::Canonical => read_canonical(&text)
            .at(path)?
            .into_iter()
            .map(|r| {
                (
                    r.id,
                    EncoderInput {
                        tokens: r.tokens,
                        pos: r.pos,
                        features: r.features,
                        external: None,
                    },
                )
            })
            .collect(),
    };
    let mut filled = false;
    for (_, input) in &mut out {
        for name in &model.config.features {
            if !input.features.contains_key(name) {
                let col = input.tokens.iter().map(|t| t.to_lowercase()).collect();
                input.features.insert(name.clone(), col);
                filled = true;
            }
        }
    }
    if filled {
        warn!("filled missing feature columns with lowercased tokens");
    }
    Ok(out)
}

fn attach(sentences: &mut [(String, EncoderInput)], path: Option<&Path>, dim: usize) -> Result<(), CliError> {
    let Some(p) = path else { return Ok(()) };
    let vectors = read_external_embeddings(&read_text(p)?, dim).at(p)?;
    for (id, input) in sentences {
        let v = vectors
            .get(id)
            .ok_or_else(|| CliError::Invalid(format!("{}: no vectors for sentence `{id}`", p.display())))?;
        input.external = Some(v.clone());
    }
    Ok(())
}

fn parse_command(a: &ParseArgs) -> Result<(), CliError> {
    let model = Model::load(&a.checkpoint).at(&a.checkpoint)?;
    let framework = model.config.framework;
    let mut sentences = read_sentences(&a.input, a.input_format, &model)?;
    attach(&mut sentences, a.external.as_deref(), model.config.external_dim)?;
    let opts = a.decode.options();
    let records = sentences
        .par_iter()
        .map(|(id, input)| {
            let parsed = parse(&model, input, framework, &opts)
                .map_err(|e| CliError::Invalid(format!("sentence {id}: {e}")))?;
            let mut r = CanonicalGraphRecord::from_graph(id.clone(), input.tokens.clone(), input.pos.clone(), parsed.graph);
            r.features = input.features.clone();
            Ok(r)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    write_output(a.output.as_deref(), &write_graphs(&records, a.format)?)
}

/// Output of the `eval` subcommand.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub framework: Framework,
    pub metric: String,
    pub sentences: usize,
    pub score: F1Report,
    pub audit: AuditReport,
}

pub fn evaluate_graphs(
    gold: &[SemanticGraph],
    pred: &[SemanticGraph],
    smatch: &SmatchOptions,
    functional: &[String],
) -> Result<EvalReport, CliError> {
    if gold.len() != pred.len() {
        return Err(EvalError::Length {
            gold: gold.len(),
            pred: pred.len(),
        }
        .into());
    }
    let framework = gold.first().or(pred.first()).map_or(Framework::Amr, |g| g.framework);
    let scores = gold
        .par_iter()
        .zip(pred)
        .map(|(g, p)| match framework {
            Framework::Amr => smatch_score(g, p, smatch),
            _ => labeled_triple_f1(g, p),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvalReport {
        framework,
        metric: if framework == Framework::Amr { "smatch" } else { "labeled_f1" }.into(),
        sentences: gold.len(),
        score: F1Report::merge(scores),
        audit: validity_audit(pred, functional),
    })
}

fn eval_command(a: &EvalArgs) -> Result<(), CliError> {
    let gold = read_graphs(&a.gold, a.format, None)?;
    let framework = gold.first().map(|r| r.framework);
    let pred = read_graphs(&a.pred, a.format, framework)?;
    if let Some(fw) = framework {
        if let Some(bad) = gold.iter().find(|r| r.framework != fw) {
            return Err(CliError::Invalid(format!("gold record `{}` is {}, expected {fw}", bad.id, bad.framework)));
        }
    }
    let smatch = SmatchOptions {
        mode: if a.exact { SmatchMode::Exact } else { SmatchMode::hill_climb() },
        include_top: !a.no_top,
    };
    let functional = a
        .functional
        .clone()
        .unwrap_or_else(|| default_functional_labels(framework.unwrap_or(Framework::Amr)));
    let graphs = |rs: &[CanonicalGraphRecord]| rs.iter().map(CanonicalGraphRecord::graph).collect::<Vec<_>>();
    let report = evaluate_graphs(&graphs(&gold), &graphs(&pred), &smatch, &functional)?;
    write_output(a.output.as_deref(), &to_json(&report))
}

fn bench_command(a: &BenchArgs) -> Result<(), CliError> {
    let model = Model::load(&a.checkpoint).at(&a.checkpoint)?;
    let framework = model.config.framework;
    let sentences = read_sentences(&a.input, a.input_format, &model)?;
    if sentences.is_empty() {
        return Err(CliError::Invalid(format!("{}: no sentences", a.input.display())));
    }
    let corpus: Vec<(EncoderInput, Framework)> = sentences.into_iter().map(|(_, i)| (i, framework)).collect();
    let opts = DecodeOptions {
        max_len: a.max_len,
        min_len: 0,
        beam_size: a.beam_size.max(1),
        length_norm: false,
    };
    let report: SpeedReport = speed_bench(&model, &corpus, &opts, &a.lengths, a.repeats)?;
    write_output(a.output.as_deref(), &to_json(&report))
}
