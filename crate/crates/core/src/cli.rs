//! Command-line verbs. Each `cmd_*` function takes a resolved [`RunConfig`],
//! writes its artifacts under `out_dir`, and returns a summary the binary
//! prints.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{
    check_world, construct_block_model, construct_incremental_model, Variant, WorldAssignment, WorldCheck, MIN_MARGIN,
};
use crate::checkpoint::{Checkpoint, CheckpointError, Format};
use crate::config::{ConfigError, Method, RunConfig};
use crate::data::{
    load_rules, parse_triple_file, read_triples_with, subsample_train, write_triples, DataError, SubsumptionRule,
    Triple, TripleStore, Vocabulary,
};
use crate::evaluation::{evaluate, EvalError, EvalReport};
use crate::logic::{forward_closure, logical_hit1, strip_redundant};
use crate::models::{ModelKind, Nonlinearity};
use crate::pipeline::{fit, logical_baseline, stripped, FitSpec, PipelineError};
use crate::seed;

/// Largest `|E| * |R| * |E|` the expressivity check will enumerate.
pub const MAX_WORLD_TRIPLES: usize = 10_000;

/// Scores this close to 0 on every training triple count as a collapsed fit.
pub const COLLAPSE_SCORE: f64 = 1e-6;

/// A failure tagged with a stable category for scripts.
#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub category: &'static str,
    pub message: String,
    /// Report text produced before the failure, if any.
    pub output: String,
}

impl CliError {
    fn new(category: &'static str, message: impl ToString) -> Self {
        Self {
            category,
            message: message.to_string(),
            output: String::new(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category {
            "config" => 2,
            "data" => 3,
            "io" => 4,
            "model" => 5,
            "train" => 6,
            "eval" => 7,
            "checkpoint" => 8,
            "vocab" => 9,
            "check" => 10,
            _ => 1,
        }
    }

    /// `error[category]: message` on a single line.
    pub fn line(&self) -> String {
        format!("error[{}]: {}", self.category, self.message.replace(['\n', '\r'], " "))
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::new("config", e)
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        let unknown = matches!(
            &e,
            DataError::UnknownSymbol { .. }
        ) || matches!(&e, DataError::File { source, .. } if matches!(**source, DataError::UnknownSymbol { .. }));
        CliError::new(if unknown { "vocab" } else { "data" }, e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new("io", e)
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        CliError::new("checkpoint", e)
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::new("eval", e)
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let category = match e {
            PipelineError::Model(_) => "model",
            PipelineError::Train(_) | PipelineError::TieViolated(_) => "train",
            PipelineError::Eval(_) | PipelineError::Logic(_) => "eval",
        };
        CliError::new(category, e)
    }
}

#[derive(Debug, Parser)]
#[command(name = "taxokg", version, about = "Knowledge-graph embeddings with subsumption-constrained SimplE+")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model and write a checkpoint, loss curve and manifest.
    Train(RunArgs),
    /// Rank test triples with a checkpoint.
    Evaluate(RunArgs),
    /// Compare methods on growing subsamples of the training set.
    SweepFraction(RunArgs),
    /// Remove training triples implied by the rules.
    StripRedundant(RunArgs),
    /// Close the training set under the rules and score the test set.
    InferLogical(RunArgs),
    /// Verify the explicit SimplE+ constructions on random worlds.
    CheckExpressivity(RunArgs),
}

/// Flags shared by every verb; each overrides the matching config key.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub out_dir: Option<String>,
    /// simple, simple-plus or complex.
    #[arg(long)]
    pub model: Option<String>,
    /// relu, logistic or exp (simple-plus only).
    #[arg(long)]
    pub phi: Option<String>,
    #[arg(long)]
    pub rules: Option<String>,
    #[arg(long)]
    pub train: Option<String>,
    #[arg(long)]
    pub valid: Option<String>,
    #[arg(long)]
    pub test: Option<String>,
    #[arg(long)]
    pub checkpoint: Option<String>,
    #[arg(long)]
    pub dim: Option<String>,
    #[arg(long)]
    pub epochs: Option<String>,
    #[arg(long)]
    pub batch_size: Option<String>,
    #[arg(long)]
    pub neg_ratio: Option<String>,
    #[arg(long)]
    pub learning_rate: Option<String>,
    #[arg(long)]
    pub l2_lambda: Option<String>,
    /// adagrad or sgd.
    #[arg(long)]
    pub optimizer: Option<String>,
    /// optimistic, expected or both.
    #[arg(long)]
    pub tie_mode: Option<String>,
    /// text or binary checkpoint.
    #[arg(long)]
    pub format: Option<String>,
    /// Comma-separated subsample fractions.
    #[arg(long)]
    pub fractions: Option<String>,
    /// Comma-separated methods: simple, simple-plus, logical.
    #[arg(long)]
    pub methods: Option<String>,
    #[arg(long)]
    pub max_entities: Option<String>,
    #[arg(long)]
    pub max_relations: Option<String>,
    #[arg(long)]
    pub max_facts: Option<String>,
    #[arg(long)]
    pub trials: Option<String>,
    /// Filter known triples when ranking (default).
    #[arg(long, conflicts_with = "raw")]
    pub filtered: bool,
    /// Rank against every corruption, known or not.
    #[arg(long)]
    pub raw: bool,
    /// Strip rule-implied triples from train before fitting.
    #[arg(long)]
    pub strip: bool,
    /// Use the rules for stripping and the baseline only, not for ties.
    #[arg(long)]
    pub no_enforce: bool,
    /// Also write per-triple ranks.
    #[arg(long)]
    pub ranks: bool,
    /// Run the constructions exactly as printed, without repairs.
    #[arg(long)]
    pub proof_literal: bool,
}

impl RunArgs {
    /// Defaults, then the config file, then explicit flags.
    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let pairs = [
            ("seed", &self.seed),
            ("out_dir", &self.out_dir),
            ("model", &self.model),
            ("phi", &self.phi),
            ("rules", &self.rules),
            ("train", &self.train),
            ("valid", &self.valid),
            ("test", &self.test),
            ("checkpoint", &self.checkpoint),
            ("dim", &self.dim),
            ("epochs", &self.epochs),
            ("batch_size", &self.batch_size),
            ("neg_ratio", &self.neg_ratio),
            ("learning_rate", &self.learning_rate),
            ("l2_lambda", &self.l2_lambda),
            ("optimizer", &self.optimizer),
            ("tie_mode", &self.tie_mode),
            ("format", &self.format),
            ("fractions", &self.fractions),
            ("methods", &self.methods),
            ("max_entities", &self.max_entities),
            ("max_relations", &self.max_relations),
            ("max_facts", &self.max_facts),
            ("trials", &self.trials),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        for (flag, key, value) in [
            (self.filtered, "filtered", "true"),
            (self.raw, "filtered", "false"),
            (self.strip, "strip", "true"),
            (self.no_enforce, "enforce", "false"),
            (self.ranks, "ranks", "true"),
            (self.proof_literal, "proof_literal", "true"),
        ] {
            if flag {
                cfg.set(key, value)?;
            }
        }
        Ok(cfg)
    }
}

/// Parses `args` (program name first), runs the verb, and returns the text
/// to print.
pub fn run_from<I, T>(args: I) -> Result<String, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::new("config", e.to_string().trim()))?;
    run(&cli)
}

pub fn run(cli: &Cli) -> Result<String, CliError> {
    let (verb, args) = match &cli.command {
        Command::Train(a) => ("train", a),
        Command::Evaluate(a) => ("evaluate", a),
        Command::SweepFraction(a) => ("sweep-fraction", a),
        Command::StripRedundant(a) => ("strip-redundant", a),
        Command::InferLogical(a) => ("infer-logical", a),
        Command::CheckExpressivity(a) => ("check-expressivity", a),
    };
    let cfg = args.resolve()?;
    match verb {
        "train" => cmd_train(&cfg).map(|o| o.summary()),
        "evaluate" => cmd_evaluate(&cfg).map(|(kind, reports)| {
            let label = kind.to_string();
            reports.iter().map(|r| format!("[{}]\n{}", r.tie_mode, r.to_table(&label))).collect()
        }),
        "sweep-fraction" => cmd_sweep_fraction(&cfg).map(|rows| sweep_csv(&rows)),
        "strip-redundant" => cmd_strip_redundant(&cfg).map(|o| format!("kept {} removed {}\n", o.kept, o.removed)),
        "infer-logical" => cmd_infer_logical(&cfg).map(|o| o.summary()),
        _ => {
            let report = cmd_check_expressivity(&cfg)?;
            let text = report.to_text();
            if report.passed {
                Ok(text)
            } else {
                let mut e = CliError::new(
                    "check",
                    format!("{} of {} constructions failed", report.failures(), report.rows.len()),
                );
                e.output = text;
                Err(e)
            }
        }
    }
}

/// Git-style content hash: sha256 over `blob <len>\0<bytes>`.
pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    let digest = h.finalize();
    let mut out = String::from("sha256:");
    for b in digest.iter() {
        let _ = write!(out, "{b:02x}");
    }
    out
}

fn hash_file(path: &Path) -> Result<String, CliError> {
    Ok(blob_hash(&fs::read(path)?))
}

/// Writes `manifest.json` and `run.conf` describing a completed run.
fn write_manifest(cfg: &RunConfig, verb: &str, outputs: &[PathBuf]) -> Result<(), CliError> {
    let mut inputs = BTreeMap::new();
    for (key, path) in [
        ("train", &cfg.train),
        ("valid", &cfg.valid),
        ("test", &cfg.test),
        ("rules", &cfg.rules),
        ("checkpoint", &cfg.checkpoint),
    ] {
        if let Some(p) = path {
            inputs.insert(key, json!({"path": p.display().to_string(), "hash": hash_file(p)?}));
        }
    }
    let mut outs = BTreeMap::new();
    for p in outputs {
        let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        outs.insert(name, Value::String(hash_file(p)?));
    }
    let config: BTreeMap<&str, String> = cfg.entries().into_iter().collect();
    let manifest = json!({
        "command": verb,
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "inputs": inputs,
        "outputs": outs,
    });
    fs::write(cfg.out_dir.join("run.conf"), cfg.to_text())?;
    fs::write(
        cfg.out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("json values serialize") + "\n",
    )?;
    Ok(())
}

fn prepare_out_dir(cfg: &RunConfig) -> Result<(), CliError> {
    fs::create_dir_all(&cfg.out_dir)?;
    Ok(())
}

/// Loads the splits and (optionally) the rules into one vocabulary.
fn load_store(cfg: &RunConfig) -> Result<(TripleStore, Vec<SubsumptionRule>), CliError> {
    let train = cfg.require("train", &cfg.train)?;
    let test = cfg.require("test", &cfg.test)?;
    let mut store = TripleStore::load(train, cfg.valid.as_deref(), test)?;
    let rules = match &cfg.rules {
        Some(p) => load_rules(p, &mut store.vocab)?,
        None => Vec::new(),
    };
    if cfg.strip && cfg.rules.is_none() {
        return Err(CliError::new("config", "strip requires a rules file"));
    }
    let store = if cfg.strip { stripped(&store, &rules) } else { store };
    Ok((store, rules))
}

fn fit_spec(cfg: &RunConfig) -> FitSpec {
    let mut spec = FitSpec::new(cfg.model, cfg.dim, cfg.training.clone());
    spec.phi = cfg.effective_phi();
    spec.tie_rules = cfg.ties_rules();
    spec
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: PathBuf,
    pub loss_csv: PathBuf,
    pub final_loss: Option<f64>,
    pub epochs: usize,
    pub train_triples: usize,
    /// Every training triple scores within [`COLLAPSE_SCORE`] of 0, usually because `l2_lambda`
    /// pulled all embeddings to zero.
    pub collapsed: bool,
}

impl TrainOutcome {
    fn summary(&self) -> String {
        format!(
            "trained on {} triples for {} epochs, final loss {}\ncheckpoint {}\n",
            self.train_triples,
            self.epochs,
            self.final_loss.map(|l| format!("{l:.6}")).unwrap_or_else(|| "n/a".into()),
            self.checkpoint.display()
        ) + if self.collapsed {
            "warning: every training triple scores about 0; the model collapsed, try a smaller l2_lambda\n"
        } else {
            ""
        }
    }
}

pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutcome, CliError> {
    cfg.validate_training()?;
    let (store, rules) = load_store(cfg)?;
    prepare_out_dir(cfg)?;
    let (model, trace) = fit(&store, &rules, &fit_spec(cfg))?;
    let collapsed = !store.train.is_empty() && store.train.iter().all(|t| model.score(t).abs() < COLLAPSE_SCORE);
    let checkpoint = cfg.out_dir.join(match cfg.format {
        Format::Text => "model.ckpt",
        Format::Binary => "model.bin",
    });
    Checkpoint::new(store.vocab.clone(), model)?.save(&checkpoint, cfg.format)?;
    let loss_csv = cfg.out_dir.join("loss.csv");
    trace.write_csv(BufWriter::new(fs::File::create(&loss_csv)?), true)?;
    write_manifest(cfg, "train", &[checkpoint.clone(), loss_csv.clone()])?;
    Ok(TrainOutcome {
        collapsed,
        checkpoint,
        loss_csv,
        final_loss: trace.last(),
        epochs: trace.len(),
        train_triples: store.train.len(),
    })
}

/// The checkpoint's model kind and one report per requested tie mode. With
/// `filtered = false` nothing is filtered, so both metric columns show raw
/// ranks.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<(ModelKind, Vec<EvalReport>), CliError> {
    cfg.validate()?;
    let ckpt_path = cfg.require("checkpoint", &cfg.checkpoint)?;
    let test_path = cfg.require("test", &cfg.test)?;
    let ckpt = Checkpoint::load(ckpt_path)?;
    let test = read_triples_with(test_path, &ckpt.vocab)?;
    let mut known = std::collections::HashSet::new();
    if cfg.filtered {
        for p in [&cfg.train, &cfg.valid].into_iter().flatten() {
            known.extend(read_triples_with(p, &ckpt.vocab)?);
        }
        known.extend(test.iter().copied());
    }
    prepare_out_dir(cfg)?;
    let scorer = ckpt.model.scorer();
    let mut reports = Vec::new();
    let mut outputs = Vec::new();
    for tie in cfg.tie_mode.modes() {
        let report = crate::evaluation::evaluate_with(&scorer, &test, &known, tie)?;
        let json_path = cfg.out_dir.join(format!("eval_{tie}.json"));
        fs::write(&json_path, report.to_json() + "\n")?;
        let table_path = cfg.out_dir.join(format!("eval_{tie}.txt"));
        fs::write(&table_path, report.to_table(&ckpt.model.kind.to_string()))?;
        outputs.extend([json_path, table_path]);
        if cfg.ranks {
            let ranks_path = cfg.out_dir.join(format!("ranks_{tie}.csv"));
            report.write_rank_csv(BufWriter::new(fs::File::create(&ranks_path)?), &ckpt.vocab)?;
            outputs.push(ranks_path);
        }
        reports.push(report);
    }
    write_manifest(cfg, "evaluate", &outputs)?;
    Ok((ckpt.model.kind, reports))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub fraction: f64,
    pub method: Method,
    pub hit1: f64,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("fraction,method,hit1\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{:.6}", r.fraction, r.method, r.hit1);
    }
    out
}

/// Seed of the subsample drawn for `fraction`; shared by every method so
/// they see the same triples.
pub fn fraction_seed(seed: u64, fraction: f64) -> u64 {
    seed::derive(seed, &format!("fraction:{fraction:?}"))
}

/// Filtered hit@1 on the full test set of one sweep cell.
pub fn sweep_cell(
    base: &TripleStore,
    rules: &[SubsumptionRule],
    cfg: &RunConfig,
    fraction: f64,
    method: Method,
) -> Result<f64, CliError> {
    let mut rng = seed::substream(fraction_seed(cfg.training.seed, fraction), seed::SUBSAMPLE);
    let sub = subsample_train(base, fraction, &mut rng)?;
    match method {
        Method::Logical => Ok(logical_baseline(&sub.train, rules, &base.test)?),
        Method::SimplE | Method::SimplEPlus => {
            let kind = if method == Method::SimplE {
                ModelKind::SimplE
            } else {
                ModelKind::SimplEPlus
            };
            let mut spec = FitSpec::new(kind, cfg.dim, cfg.training.clone());
            if kind == ModelKind::SimplEPlus {
                spec.phi = cfg.phi.unwrap_or(Nonlinearity::Relu);
                spec.tie_rules = cfg.enforce;
            }
            let (model, _) = fit(&sub, rules, &spec)?;
            let report = evaluate(&model, &base.test, base.known(), cfg.tie_mode.modes()[0])?;
            Ok(report.hit(1))
        }
    }
}

/// Every (fraction, method) cell, run on up to `available_parallelism`
/// threads. Rows come back sorted by fraction, then method.
pub fn cmd_sweep_fraction(cfg: &RunConfig) -> Result<Vec<SweepRow>, CliError> {
    cfg.validate()?;
    if cfg.fractions.is_empty() || cfg.methods.is_empty() {
        return Err(CliError::new("config", "fractions and methods must be non-empty"));
    }
    let (base, rules) = load_store(cfg)?;
    prepare_out_dir(cfg)?;
    let mut cells: Vec<(f64, Method)> = cfg
        .fractions
        .iter()
        .flat_map(|&f| cfg.methods.iter().map(move |&m| (f, m)))
        .collect();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cells.dedup();
    let results: Mutex<Vec<Option<Result<f64, CliError>>>> = Mutex::new((0..cells.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(cells.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(f, m)) = cells.get(i) else { break };
                let r = sweep_cell(&base, &rules, cfg, f, m);
                results.lock().expect("no worker panics while holding the lock")[i] = Some(r);
            });
        }
    });
    let mut rows = Vec::with_capacity(cells.len());
    for ((fraction, method), r) in cells.into_iter().zip(results.into_inner().expect("workers joined")) {
        let hit1 = r.expect("every cell ran")?;
        rows.push(SweepRow { fraction, method, hit1 });
    }
    let csv = cfg.out_dir.join("sweep.csv");
    fs::write(&csv, sweep_csv(&rows))?;
    write_manifest(cfg, "sweep-fraction", &[csv])?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StripOutcome {
    pub kept: usize,
    pub removed: usize,
    pub reduced_path: PathBuf,
    pub removed_path: PathBuf,
}

fn read_train_only(cfg: &RunConfig) -> Result<(Vocabulary, Vec<Triple>, Vec<SubsumptionRule>), CliError> {
    let train_path = cfg.require("train", &cfg.train)?;
    let rules_path = cfg.require("rules", &cfg.rules)?;
    let mut vocab = Vocabulary::new();
    let file = fs::File::open(train_path)?;
    let train = parse_triple_file(std::io::BufReader::new(file), &mut vocab).map_err(|e| DataError::File {
        path: train_path.display().to_string(),
        source: Box::new(e),
    })?;
    let rules = load_rules(rules_path, &mut vocab)?;
    Ok((vocab, train, rules))
}

/// Writes `reduced.tsv` (kept triples in input order) and `removed.tsv`.
pub fn cmd_strip_redundant(cfg: &RunConfig) -> Result<StripOutcome, CliError> {
    cfg.validate()?;
    let (vocab, train, rules) = read_train_only(cfg)?;
    prepare_out_dir(cfg)?;
    let out = strip_redundant(&train, &rules);
    let reduced_path = cfg.out_dir.join("reduced.tsv");
    let removed_path = cfg.out_dir.join("removed.tsv");
    write_triples(BufWriter::new(fs::File::create(&reduced_path)?), &out.kept, &vocab)?;
    write_triples(BufWriter::new(fs::File::create(&removed_path)?), &out.removed, &vocab)?;
    write_manifest(cfg, "strip-redundant", &[reduced_path.clone(), removed_path.clone()])?;
    Ok(StripOutcome {
        kept: out.kept.len(),
        removed: out.removed.len(),
        reduced_path,
        removed_path,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogicalOutcome {
    pub train_triples: usize,
    pub derived_triples: usize,
    /// Logical hit@1 with the closure of the full train split.
    pub hit1: Option<f64>,
    /// Same, after removing rule-implied triples from train.
    pub hit1_stripped: Option<f64>,
}

impl LogicalOutcome {
    fn summary(&self) -> String {
        let mut s = format!("train {} derived {}\n", self.train_triples, self.derived_triples);
        if let (Some(a), Some(b)) = (self.hit1, self.hit1_stripped) {
            let _ = writeln!(s, "hit1 {a:.6} hit1_stripped {b:.6}");
        }
        s
    }
}

/// Writes `closure.tsv` (each derived triple with the triple and rule that
/// produced it) and `logical.json`.
pub fn cmd_infer_logical(cfg: &RunConfig) -> Result<LogicalOutcome, CliError> {
    cfg.validate()?;
    cfg.require("rules", &cfg.rules)?;
    let (vocab, train, test, rules) = if cfg.test.is_some() {
        let mut c = cfg.clone();
        c.strip = false;
        let (store, rules) = load_store(&c)?;
        let test = store.test.clone();
        (store.vocab, store.train, test, rules)
    } else {
        let (vocab, train, rules) = read_train_only(cfg)?;
        (vocab, train, Vec::new(), rules)
    };
    prepare_out_dir(cfg)?;
    let closure = forward_closure(&train, &rules);
    let closure_path = cfg.out_dir.join("closure.tsv");
    let mut text = String::new();
    for t in closure.new_triples() {
        let (src, rule) = closure.provenance[t];
        let _ = writeln!(
            text,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            vocab.entity_name(t.head),
            vocab.relation_name(t.relation),
            vocab.entity_name(t.tail),
            vocab.entity_name(src.head),
            vocab.relation_name(src.relation),
            vocab.entity_name(src.tail),
            rule.direction
        );
    }
    fs::write(&closure_path, text)?;
    let (hit1, hit1_stripped) = if test.is_empty() {
        (None, None)
    } else {
        let kept = strip_redundant(&train, &rules).kept;
        let a = logical_hit1(&test, &closure).map_err(|e| CliError::new("eval", e))?;
        let b = logical_baseline(&kept, &rules, &test)?;
        (Some(a), Some(b))
    };
    let outcome = LogicalOutcome {
        train_triples: train.len(),
        derived_triples: closure.new_triples().count(),
        hit1,
        hit1_stripped,
    };
    let json_path = cfg.out_dir.join("logical.json");
    fs::write(&json_path, serde_json::to_string_pretty(&outcome).expect("serializable") + "\n")?;
    write_manifest(cfg, "infer-logical", &[closure_path, json_path])?;
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstructionRow {
    pub world: usize,
    pub entities: usize,
    pub relations: usize,
    pub facts: usize,
    pub construction: &'static str,
    pub width: usize,
    pub expected_width: usize,
    pub check: WorldCheck,
}

impl ConstructionRow {
    pub fn passes(&self) -> bool {
        self.width == self.expected_width && self.check.passes(MIN_MARGIN) && self.check.min_entity_value >= 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpressivityReport {
    pub rows: Vec<ConstructionRow>,
    pub passed: bool,
}

impl ExpressivityReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.passes()).count()
    }

    pub fn min_margin(&self, construction: &str) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.construction == construction)
            .map(|r| r.check.min_margin)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            let _ = writeln!(
                s,
                "world {:>3} E={} R={} facts={} {:<11} width={} margin={:.4} misclassified={} {}",
                r.world,
                r.entities,
                r.relations,
                r.facts,
                r.construction,
                r.width,
                r.check.min_margin,
                r.check.misclassified.len(),
                if r.passes() { "pass" } else { "FAIL" }
            );
        }
        let _ = writeln!(
            s,
            "worlds {} failures {} min_margin block {:.4} incremental {:.4}",
            self.rows.len() / 2,
            self.failures(),
            self.min_margin("block"),
            self.min_margin("incremental")
        );
        s
    }
}

/// Both constructions on one world.
pub fn check_constructions(world: &WorldAssignment, index: usize, variant: Variant) -> [ConstructionRow; 2] {
    let block = construct_block_model(world, variant);
    let incremental = construct_incremental_model(world, variant);
    let row = |construction, model: &crate::models::EmbeddingModel, expected_width| ConstructionRow {
        world: index,
        entities: world.entities,
        relations: world.relations,
        facts: world.true_facts.len(),
        construction,
        width: model.dim,
        expected_width,
        check: check_world(model, world),
    };
    [
        row("block", &block, world.entities * world.relations + 1),
        row("incremental", &incremental, world.true_facts.len() + 1),
    ]
}

/// Writes `expressivity.csv`; `passed` is false if any construction
/// misclassifies a triple, misses the margin, or has the wrong width.
pub fn cmd_check_expressivity(cfg: &RunConfig) -> Result<ExpressivityReport, CliError> {
    let (ne, nr) = (cfg.max_entities, cfg.max_relations);
    if ne == 0 || nr == 0 {
        return Err(CliError::new("config", "max_entities and max_relations must be at least 1"));
    }
    if ne.saturating_mul(ne).saturating_mul(nr) > MAX_WORLD_TRIPLES {
        return Err(CliError::new(
            "config",
            format!("worlds up to {ne}x{nr}x{ne} exceed {MAX_WORLD_TRIPLES} triples"),
        ));
    }
    prepare_out_dir(cfg)?;
    let variant = if cfg.proof_literal {
        Variant::ProofLiteral
    } else {
        Variant::Repaired
    };
    let mut rng = seed::substream(cfg.training.seed, seed::WORLDS);
    let mut rows = Vec::with_capacity(2 * cfg.trials);
    for i in 0..cfg.trials {
        let world = WorldAssignment::random(&mut rng, ne, nr, cfg.max_facts);
        rows.extend(check_constructions(&world, i, variant));
    }
    let passed = rows.iter().all(ConstructionRow::passes);
    let mut csv = String::from("world,entities,relations,facts,construction,width,min_margin,misclassified,pass\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{:?},{},{}",
            r.world,
            r.entities,
            r.relations,
            r.facts,
            r.construction,
            r.width,
            r.check.min_margin,
            r.check.misclassified.len(),
            r.passes()
        );
    }
    let csv_path = cfg.out_dir.join("expressivity.csv");
    fs::write(&csv_path, csv)?;
    write_manifest(cfg, "check-expressivity", &[csv_path])?;
    Ok(ExpressivityReport { rows, passed })
}
