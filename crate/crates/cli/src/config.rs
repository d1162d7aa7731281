//! Experiment and sweep configuration.
//!
//! Both structs round-trip through TOML. Every field has a default, so a
//! config file only needs the keys it changes.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fifa_core::dataset::TableSchema;
use fifa_core::model::TrainConfig;
use fifa_core::{ConstraintKind, LossKind};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Unconstrained training on the (margin-shifted) loss.
    Plain,
    #[value(name = "expgrad")]
    ExpGrad,
    #[value(name = "gridsearch")]
    GridSearch,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Plain => "plain",
            Algorithm::ExpGrad => "expgrad",
            Algorithm::GridSearch => "gridsearch",
        })
    }
}

/// Which held-out split picks the best sweep trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    /// Lowest test combined loss, as in published result tables.
    Test,
    /// Lowest combined loss on a validation split carved from training.
    /// Preferred when the test set must stay untouched.
    Validation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    SeededRandom,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    /// Training table, or the whole table when `test` is unset.
    pub train: PathBuf,
    pub test: Option<PathBuf>,
    /// TOML file holding a table schema; `label`/`attribute` below win when set.
    pub schema_file: Option<PathBuf>,
    pub schema: TableSchema,
    /// Training share when splitting a single table.
    pub split_ratio: f64,
    pub split_seed: u64,
    pub standardize: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            train: PathBuf::new(),
            test: None,
            schema_file: None,
            schema: TableSchema::default(),
            split_ratio: 0.8,
            split_seed: 1,
            standardize: true,
        }
    }
}

impl DatasetConfig {
    pub fn resolved_schema(&self) -> Result<TableSchema> {
        let mut schema = match &self.schema_file {
            Some(path) => read_toml::<TableSchema>(path)?,
            None => self.schema.clone(),
        };
        if !self.schema.label.is_empty() {
            schema.label = self.schema.label.clone();
        }
        if !self.schema.attribute.is_empty() {
            schema.attribute = self.schema.attribute.clone();
        }
        if schema.label.is_empty() || schema.attribute.is_empty() {
            return Err(CliError::Config("the label and attribute columns must be named".into()));
        }
        Ok(schema)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpGradSettings {
    pub b: f64,
    pub nu: f64,
    pub eta: Option<f64>,
    pub max_iters: Option<usize>,
    pub warm_start: bool,
    pub warm_epochs: Option<usize>,
    /// Ignore `eta` and `max_iters`; use the step size `ν/(2ρ²B)` and stop only
    /// at the gap target or the iteration cap.
    pub theoretical: bool,
}

impl Default for ExpGradSettings {
    fn default() -> Self {
        Self {
            b: 1.0,
            nu: 0.01,
            eta: Some(2.0),
            max_iters: Some(20),
            warm_start: true,
            warm_epochs: Some(25),
            theoretical: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSettings {
    pub b: f64,
    /// Number of multiplier vectors trained.
    pub budget: usize,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self { b: 1.0, budget: 25 }
    }
}

/// One explicit margin offset `δ` for a (class, attribute) cell. Written as
/// `class:attribute:value`, with names or integer codes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DeltaCell {
    pub class: String,
    pub attribute: String,
    pub value: f64,
}

impl FromStr for DeltaCell {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let mut parts = s.rsplitn(3, ':');
        let (value, attribute, class) = match (parts.next(), parts.next(), parts.next()) {
            (Some(v), Some(a), Some(c)) if !a.is_empty() && !c.is_empty() => (v, a, c),
            _ => return Err(format!("`{s}` is not class:attribute:value")),
        };
        let value: f64 = value.parse().map_err(|_| format!("bad delta value in `{s}`"))?;
        if !(value >= 0.0 && value.is_finite()) {
            return Err(format!("delta must be finite and non-negative in `{s}`"));
        }
        Ok(DeltaCell {
            class: class.to_string(),
            attribute: attribute.to_string(),
            value,
        })
    }
}

impl TryFrom<String> for DeltaCell {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<DeltaCell> for String {
    fn from(d: DeltaCell) -> String {
        format!("{}:{}:{}", d.class, d.attribute, d.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub constraint: ConstraintKind,
    pub eps: f64,
    pub algorithm: Algorithm,
    pub loss: LossKind,
    /// `C` in the margin schedule.
    pub c_margin: f64,
    pub alpha: f64,
    /// Per-class offset levels handed out by count rank; zeros when unset.
    pub delta_levels: Option<Vec<Vec<f64>>>,
    /// Explicit per-cell offsets; overrides `delta_levels`.
    pub deltas: Vec<DeltaCell>,
    pub train: TrainConfig,
    pub expgrad: ExpGradSettings,
    pub grid: GridSettings,
    /// Master seed; the trainer's own seed field is ignored.
    pub seed: u64,
    pub selection: Selection,
    /// Share of the training rows held out when `selection` is validation.
    pub validation_ratio: f64,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetConfig::default(),
            constraint: ConstraintKind::Eo,
            eps: 0.05,
            algorithm: Algorithm::ExpGrad,
            loss: LossKind::SoftmaxCrossEntropy,
            c_margin: 0.0,
            alpha: 0.0,
            delta_levels: None,
            deltas: Vec::new(),
            train: desk_train_config(),
            expgrad: ExpGradSettings::default(),
            grid: GridSettings::default(),
            seed: 0,
            selection: Selection::Test,
            validation_ratio: 0.2,
            out: None,
        }
    }
}

/// Trainer settings that keep one ExpGrad run on a 30k-row table to seconds.
pub fn desk_train_config() -> TrainConfig {
    TrainConfig {
        step_size: 0.01,
        epochs: 100,
        ..TrainConfig::default()
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(CliError::Config(format!("eps must be non-negative, got {}", self.eps)));
        }
        if self.loss == LossKind::ZeroOne {
            return Err(CliError::Config("the zero-one loss cannot be trained".into()));
        }
        if self.dataset.train.as_os_str().is_empty() {
            return Err(CliError::Config("no dataset given".into()));
        }
        for path in std::iter::once(&self.dataset.train).chain(&self.dataset.test) {
            if !path.is_file() {
                return Err(CliError::Config(format!("{} does not exist", path.display())));
            }
        }
        if !(self.validation_ratio > 0.0 && self.validation_ratio < 1.0) {
            return Err(CliError::Config("validation_ratio must lie in (0, 1)".into()));
        }
        self.train.validate()?;
        Ok(())
    }

    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        read_toml(path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub base: ExperimentConfig,
    pub c_range: [f64; 2],
    pub alpha_range: [f64; 2],
    pub delta_range: [f64; 2],
    pub budget: usize,
    pub strategy: Strategy,
    /// When false every trial keeps the base margins and only the seed moves.
    pub vary_margins: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            base: ExperimentConfig::default(),
            c_range: [0.0, 0.01],
            alpha_range: [0.0, 0.01],
            delta_range: [0.0, 0.01],
            budget: 30,
            strategy: Strategy::SeededRandom,
            vary_margins: true,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(CliError::Config("budget must be at least 1".into()));
        }
        for (name, [lo, hi]) in [
            ("c_range", self.c_range),
            ("alpha_range", self.alpha_range),
            ("delta_range", self.delta_range),
        ] {
            if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
                return Err(CliError::Config(format!("{name} must be 0 <= lo <= hi, got [{lo}, {hi}]")));
            }
        }
        self.base.validate()
    }

    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        read_toml(path)
    }
}

fn read_toml<C: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<C> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(toml::from_str(&text)?)
}

/// Overlay `top` onto `base` table by table; scalars and arrays in `top` win.
pub fn merge_toml(base: &mut toml::Value, top: toml::Value) {
    match (base, top) {
        (toml::Value::Table(b), toml::Value::Table(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge_toml(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Serialize `base`, overlay the TOML file at `path`, and read the result back.
pub fn overlay_file<C>(base: &C, path: impl AsRef<Path>) -> Result<C>
where
    C: Serialize + serde::de::DeserializeOwned,
{
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let top: toml::Value = toml::from_str(&text)?;
    let mut merged = toml::Value::try_from(base).map_err(|e| CliError::Config(e.to_string()))?;
    merge_toml(&mut merged, top);
    merged.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))
}
