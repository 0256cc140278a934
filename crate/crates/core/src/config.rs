//! Run configuration: a flat `key = value` file, overridable per key from the
//! command line. Precedence is command line, then file, then defaults.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::checkpoint::Format;
use crate::evaluation::TieMode;
use crate::models::{ModelKind, Nonlinearity};
use crate::training::TrainConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {message}")]
    Invalid { key: String, value: String, message: String },
    #[error("{0}")]
    Check(String),
}

/// Which tie conventions to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TieSelection {
    Optimistic,
    Expected,
    Both,
}

impl TieSelection {
    pub fn modes(self) -> Vec<TieMode> {
        match self {
            TieSelection::Optimistic => vec![TieMode::Optimistic],
            TieSelection::Expected => vec![TieMode::Expected],
            TieSelection::Both => vec![TieMode::Optimistic, TieMode::Expected],
        }
    }
}

impl fmt::Display for TieSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TieSelection::Optimistic => "optimistic",
            TieSelection::Expected => "expected",
            TieSelection::Both => "both",
        })
    }
}

impl FromStr for TieSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "optimistic" => Ok(TieSelection::Optimistic),
            "expected" => Ok(TieSelection::Expected),
            "both" => Ok(TieSelection::Both),
            _ => Err("expected optimistic, expected or both".into()),
        }
    }
}

/// A competitor in the fraction sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[serde(rename = "simple")]
    SimplE,
    #[serde(rename = "simple-plus")]
    SimplEPlus,
    Logical,
}

impl Method {
    pub fn token(self) -> &'static str {
        match self {
            Method::SimplE => "simple",
            Method::SimplEPlus => "simple-plus",
            Method::Logical => "logical",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simple" => Ok(Method::SimplE),
            "simple-plus" => Ok(Method::SimplEPlus),
            "logical" => Ok(Method::Logical),
            _ => Err("expected simple, simple-plus or logical".into()),
        }
    }
}

fn format_token(f: Format) -> &'static str {
    match f {
        Format::Text => "text",
        Format::Binary => "binary",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub model: ModelKind,
    /// `None` means the model's default.
    pub phi: Option<Nonlinearity>,
    pub dim: usize,
    pub training: TrainConfig,
    pub filtered: bool,
    pub tie_mode: TieSelection,
    /// Tie relations along the rules (SimplE+ only).
    pub enforce: bool,
    /// Drop rule-implied training triples before fitting.
    pub strip: bool,
    pub format: Format,
    pub ranks: bool,
    pub fractions: Vec<f64>,
    pub methods: Vec<Method>,
    pub max_entities: usize,
    pub max_relations: usize,
    pub max_facts: usize,
    pub trials: usize,
    pub proof_literal: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: None,
            valid: None,
            test: None,
            rules: None,
            checkpoint: None,
            out_dir: PathBuf::from("out"),
            model: ModelKind::SimplEPlus,
            phi: None,
            dim: 200,
            training: TrainConfig::default(),
            filtered: true,
            tie_mode: TieSelection::Optimistic,
            enforce: true,
            strip: false,
            format: Format::Text,
            ranks: false,
            fractions: vec![0.2, 0.5, 1.0],
            methods: vec![Method::SimplE, Method::SimplEPlus, Method::Logical],
            max_entities: 4,
            max_relations: 3,
            max_facts: 6,
            trials: 50,
            proof_literal: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Invalid {
        key: key.to_owned(),
        value: value.to_owned(),
        message: e.to_string(),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(ConfigError::Invalid {
            key: key.to_owned(),
            value: value.to_owned(),
            message: "expected true or false".into(),
        }),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn path_opt(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

fn join<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Keys accepted by [`RunConfig::set`]; dashes and underscores are
    /// interchangeable.
    pub const KEYS: [&'static str; 29] = [
        "train",
        "valid",
        "test",
        "rules",
        "checkpoint",
        "out_dir",
        "model",
        "phi",
        "dim",
        "epochs",
        "batch_size",
        "neg_ratio",
        "learning_rate",
        "l2_lambda",
        "optimizer",
        "seed",
        "filtered",
        "tie_mode",
        "enforce",
        "strip",
        "format",
        "ranks",
        "fractions",
        "methods",
        "max_entities",
        "max_relations",
        "max_facts",
        "trials",
        "proof_literal",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = key.replace('-', "_");
        let k = key.as_str();
        let value = value.trim();
        let path = || (!value.is_empty()).then(|| PathBuf::from(value));
        match k {
            "train" => self.train = path(),
            "valid" => self.valid = path(),
            "test" => self.test = path(),
            "rules" => self.rules = path(),
            "checkpoint" => self.checkpoint = path(),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "model" => self.model = parse(k, value)?,
            "phi" => {
                self.phi = if value.is_empty() || value == "default" {
                    None
                } else {
                    Some(parse(k, value)?)
                }
            }
            "dim" => self.dim = parse(k, value)?,
            "epochs" => self.training.epochs = parse(k, value)?,
            "batch_size" => self.training.batch_size = parse(k, value)?,
            "neg_ratio" => self.training.neg_ratio = parse(k, value)?,
            "learning_rate" => self.training.learning_rate = parse(k, value)?,
            "l2_lambda" => self.training.l2_lambda = parse(k, value)?,
            "optimizer" => self.training.optimizer = parse(k, value)?,
            "seed" => self.training.seed = parse(k, value)?,
            "filtered" => self.filtered = parse_bool(k, value)?,
            "tie_mode" => self.tie_mode = parse(k, value)?,
            "enforce" => self.enforce = parse_bool(k, value)?,
            "strip" => self.strip = parse_bool(k, value)?,
            "format" => {
                self.format = match value {
                    "text" => Format::Text,
                    "binary" => Format::Binary,
                    _ => {
                        return Err(ConfigError::Invalid {
                            key: key.clone(),
                            value: value.to_owned(),
                            message: "expected text or binary".into(),
                        })
                    }
                }
            }
            "ranks" => self.ranks = parse_bool(k, value)?,
            "fractions" => self.fractions = parse_list(k, value)?,
            "methods" => self.methods = parse_list(k, value)?,
            "max_entities" => self.max_entities = parse(k, value)?,
            "max_relations" => self.max_relations = parse(k, value)?,
            "max_facts" => self.max_facts = parse(k, value)?,
            "trials" => self.trials = parse(k, value)?,
            "proof_literal" => self.proof_literal = parse_bool(k, value)?,
            _ => return Err(ConfigError::UnknownKey(key)),
        }
        Ok(())
    }

    /// Applies every `key = value` line of a config text. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Line {
                    line: i + 1,
                    message: format!("expected `key = value`, found `{line}`"),
                });
            };
            self.set(k.trim(), v).map_err(|e| ConfigError::Line {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        self.apply_text(&text)
    }

    /// Every key with its current value, in [`RunConfig::KEYS`] order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let t = &self.training;
        let values = [
            path_opt(&self.train),
            path_opt(&self.valid),
            path_opt(&self.test),
            path_opt(&self.rules),
            path_opt(&self.checkpoint),
            self.out_dir.display().to_string(),
            self.model.to_string(),
            self.phi.map(|p| p.to_string()).unwrap_or_else(|| "default".into()),
            self.dim.to_string(),
            t.epochs.to_string(),
            t.batch_size.to_string(),
            t.neg_ratio.to_string(),
            format!("{:?}", t.learning_rate),
            format!("{:?}", t.l2_lambda),
            t.optimizer.to_string(),
            t.seed.to_string(),
            self.filtered.to_string(),
            self.tie_mode.to_string(),
            self.enforce.to_string(),
            self.strip.to_string(),
            format_token(self.format).to_owned(),
            self.ranks.to_string(),
            join(&self.fractions.iter().map(|f| format!("{f:?}")).collect::<Vec<_>>()),
            join(&self.methods),
            self.max_entities.to_string(),
            self.max_relations.to_string(),
            self.max_facts.to_string(),
            self.trials.to_string(),
            self.proof_literal.to_string(),
        ];
        Self::KEYS.into_iter().zip(values).collect()
    }

    /// The config as a file [`RunConfig::apply_text`] reads back unchanged.
    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// The nonlinearity the model will actually use.
    pub fn effective_phi(&self) -> Nonlinearity {
        match self.model {
            ModelKind::SimplEPlus => self.phi.unwrap_or(Nonlinearity::Relu),
            _ => Nonlinearity::Identity,
        }
    }

    /// Whether the rules file ties relations in the trained model.
    pub fn ties_rules(&self) -> bool {
        self.enforce && self.rules.is_some() && self.model == ModelKind::SimplEPlus
    }

    /// Checks that do not depend on the verb.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.training.validate().map_err(|e| ConfigError::Check(e.to_string()))?;
        if self.dim == 0 {
            return Err(ConfigError::Check("dim must be at least 1".into()));
        }
        if self.model != ModelKind::SimplEPlus && self.phi.is_some_and(|p| p != Nonlinearity::Identity) {
            return Err(ConfigError::Check(format!("phi applies only to simple-plus, not {}", self.model)));
        }
        if let Some(f) = self.fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
            return Err(ConfigError::Check(format!("fraction {f} outside (0, 1]")));
        }
        for (key, p) in [
            ("train", &self.train),
            ("valid", &self.valid),
            ("test", &self.test),
            ("rules", &self.rules),
            ("checkpoint", &self.checkpoint),
        ] {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(ConfigError::Check(format!("{key} file {} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }

    /// Extra checks for a single training run.
    pub fn validate_training(&self) -> Result<(), ConfigError> {
        self.validate()?;
        if self.enforce && self.rules.is_some() && self.model != ModelKind::SimplEPlus {
            return Err(ConfigError::Check(format!(
                "enforcing rules requires simple-plus, not {} (set enforce = false to only use them for stripping)",
                self.model
            )));
        }
        Ok(())
    }

    pub fn require<'a>(&self, key: &str, p: &'a Option<PathBuf>) -> Result<&'a Path, ConfigError> {
        p.as_deref().ok_or_else(|| ConfigError::Check(format!("missing required `{key}`")))
    }
}
