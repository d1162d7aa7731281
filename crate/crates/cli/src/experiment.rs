//! Single experiment runs and their JSON records.

use std::path::Path;
use std::time::Instant;

use fifa_core::dataset::{self, census, LabeledDataset, Standardizer, SubgroupCounts};
use fifa_core::margins::{assign_deltas, build_schedule};
use fifa_core::metrics::{evaluate, generalization_gap, FairnessReport};
use fifa_core::model::train;
use fifa_core::reductions::{
    build_constraints, expgrad, grid_search, lambda_grid, BestResponseConfig, Certificate, ExpGradConfig,
};
use fifa_core::{rng, MarginSchedule};
use serde::{Deserialize, Serialize};

use crate::config::{Algorithm, DeltaCell, ExperimentConfig, Selection};
use crate::error::{CliError, Result};

/// Loaded and preprocessed splits, reusable across runs with the same dataset settings.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: LabeledDataset<f64>,
    pub test: LabeledDataset<f64>,
    pub validation: Option<LabeledDataset<f64>>,
}

pub fn prepare(config: &ExperimentConfig) -> Result<PreparedData> {
    let ds = &config.dataset;
    let schema = ds.resolved_schema()?;
    let (train, test) = match &ds.test {
        Some(test) => dataset::load_train_test(&ds.train, test, &schema)?,
        None => {
            let all = dataset::load_table(&ds.train, &schema)?;
            dataset::split(&all, ds.split_ratio, ds.split_seed)?
        }
    };
    let (train, validation) = match config.selection {
        Selection::Test => (train, None),
        Selection::Validation => {
            let seed = rng::derive_seed(ds.split_seed, "validation", 0);
            let (fit, held) = dataset::split(&train, 1.0 - config.validation_ratio, seed)?;
            (fit, Some(held))
        }
    };
    if !ds.standardize {
        return Ok(PreparedData { train, test, validation });
    }
    let scaler = Standardizer::fit(&train)?;
    Ok(PreparedData {
        test: scaler.apply(&test)?,
        validation: validation.map(|v| scaler.apply(&v)).transpose()?,
        train: scaler.apply(&train)?,
    })
}

fn lookup(names: &[String], key: &str, what: &str) -> Result<usize> {
    if let Some(i) = names.iter().position(|n| n == key) {
        return Ok(i);
    }
    match key.parse::<usize>() {
        Ok(i) if i < names.len() => Ok(i),
        _ => Err(CliError::Config(format!("unknown {what} `{key}` (known: {})", names.join(", ")))),
    }
}

/// Turn explicit cell offsets into per-class level lists and check that the
/// rank-based assignment hands each level back to the cell it was given to.
pub fn levels_from_cells(
    cells: &[DeltaCell],
    counts: &SubgroupCounts,
    class_names: &[String],
    attribute_names: &[String],
) -> Result<Vec<Vec<f64>>> {
    let (k, m) = (counts.n_classes(), counts.n_attributes());
    let mut table = vec![vec![0.0; m]; k];
    let mut seen = vec![vec![false; m]; k];
    for cell in cells {
        let i = lookup(class_names, &cell.class, "class")?;
        let a = lookup(attribute_names, &cell.attribute, "attribute")?;
        if std::mem::replace(&mut seen[i][a], true) {
            return Err(CliError::Config(format!("delta for {}:{} given twice", cell.class, cell.attribute)));
        }
        table[i][a] = cell.value;
    }
    let mut levels = Vec::with_capacity(k);
    for (i, row) in table.iter().enumerate() {
        let mut sorted = row.clone();
        sorted.sort_by(f64::total_cmp);
        let assigned = assign_deltas(counts, i, &sorted).map_err(|e| {
            CliError::Config(format!("deltas for class {}: {e}", class_names[i]))
        })?;
        if &assigned != row {
            return Err(CliError::Config(format!(
                "deltas for class {} must grow as cells shrink (largest cell gets 0); asked {:?}, rank order gives {:?}",
                class_names[i], row, assigned
            )));
        }
        levels.push(sorted);
    }
    Ok(levels)
}

pub fn schedule_for(config: &ExperimentConfig, train: &LabeledDataset<f64>) -> Result<MarginSchedule> {
    let counts = census(train)?;
    let (k, m) = (counts.n_classes(), counts.n_attributes());
    let levels = if !config.deltas.is_empty() {
        levels_from_cells(&config.deltas, &counts, train.class_names(), train.attribute_names())?
    } else {
        config.delta_levels.clone().unwrap_or_else(|| vec![vec![0.0; m]; k])
    };
    Ok(build_schedule(&counts, config.c_margin, config.alpha, &levels, config.constraint)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

/// `|test − train|` for each headline metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gaps {
    pub balanced_error: f64,
    pub fairness_violation: f64,
    pub combined_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub selected: usize,
    pub feasible: bool,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub status: RunStatus,
    pub error: Option<String>,
    pub config: ExperimentConfig,
    pub n_train: usize,
    pub n_test: usize,
    pub n_features: usize,
    pub schedule: Option<serde_json::Value>,
    pub train: Option<FairnessReport>,
    pub test: Option<FairnessReport>,
    pub validation: Option<FairnessReport>,
    pub gaps: Option<Gaps>,
    pub certificate: Option<Certificate>,
    pub grid: Option<GridSummary>,
    pub wall_time_s: f64,
}

impl RunRecord {
    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Ok
    }

    /// One-line JSON.
    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// The JSON line without the wall-time field, for reproducibility checks.
    pub fn numeric_fingerprint(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("wall_time_s");
        }
        Ok(serde_json::to_string(&v)?)
    }

    /// Combined loss used to rank trials under `selection`.
    pub fn selection_loss(&self, selection: Selection) -> Option<f64> {
        let report = match selection {
            Selection::Test => self.test.as_ref(),
            Selection::Validation => self.validation.as_ref(),
        };
        report.map(|r| r.combined_loss)
    }
}

/// Load the data named in `config`, then [`run_prepared`].
pub fn run(config: &ExperimentConfig) -> RunRecord {
    let start = Instant::now();
    let prepared = config.validate().and_then(|_| prepare(config));
    match prepared {
        Ok(data) => {
            let mut record = run_prepared(config, &data);
            record.wall_time_s = start.elapsed().as_secs_f64();
            record
        }
        Err(e) => failed(config, e, start),
    }
}

fn failed(config: &ExperimentConfig, e: CliError, start: Instant) -> RunRecord {
    RunRecord {
        status: RunStatus::Failed,
        error: Some(e.to_string()),
        config: config.clone(),
        n_train: 0,
        n_test: 0,
        n_features: 0,
        schedule: None,
        train: None,
        test: None,
        validation: None,
        gaps: None,
        certificate: None,
        grid: None,
        wall_time_s: start.elapsed().as_secs_f64(),
    }
}

/// Train and evaluate on already prepared data. Errors become a failed record.
pub fn run_prepared(config: &ExperimentConfig, data: &PreparedData) -> RunRecord {
    let start = Instant::now();
    match execute(config, data) {
        Ok(mut record) => {
            record.wall_time_s = start.elapsed().as_secs_f64();
            record
        }
        Err(e) => {
            let mut r = failed(config, e, start);
            r.n_train = data.train.len();
            r.n_test = data.test.len();
            r.n_features = data.train.n_features();
            r
        }
    }
}

fn execute(config: &ExperimentConfig, data: &PreparedData) -> Result<RunRecord> {
    let train_data = &data.train;
    let schedule = schedule_for(config, train_data)?;
    let mut train_cfg = config.train.clone();
    train_cfg.seed = config.seed;
    let br = BestResponseConfig {
        loss: config.loss,
        train: train_cfg.clone(),
    };
    let kind = config.constraint;

    let mut certificate = None;
    let mut grid = None;
    let (train, test, validation) = match config.algorithm {
        Algorithm::Plain => {
            let weights = vec![1.0; train_data.len()];
            let scorer = train(train_data, None, &weights, config.loss, &schedule, &train_cfg)?;
            reports(&scorer, data, kind)?
        }
        Algorithm::ExpGrad => {
            let system = build_constraints(kind, train_data, config.eps)?;
            let s = &config.expgrad;
            let mut eg = ExpGradConfig::new(s.b, s.nu, br);
            if !s.theoretical {
                eg.eta = s.eta;
                eg.max_iters = s.max_iters;
            }
            eg.warm_start = s.warm_start;
            eg.warm_epochs = s.warm_epochs;
            let out = expgrad(train_data, &system, &schedule, &eg)?;
            certificate = Some(out.certificate);
            reports(&out.classifier, data, kind)?
        }
        Algorithm::GridSearch => {
            let system = build_constraints(kind, train_data, config.eps)?;
            let lambdas = lambda_grid(&system, config.grid.b, config.grid.budget)?;
            let out = grid_search(train_data, &system, &schedule, &lambdas, &br)?;
            grid = Some(GridSummary {
                selected: out.selected,
                feasible: out.feasible,
                points: out.points.len(),
            });
            reports(&out.scorer, data, kind)?
        }
    };
    let gaps = Gaps {
        balanced_error: generalization_gap(train.balanced_error, test.balanced_error),
        fairness_violation: generalization_gap(train.fairness_violation, test.fairness_violation),
        combined_loss: generalization_gap(train.combined_loss, test.combined_loss),
    };
    Ok(RunRecord {
        status: RunStatus::Ok,
        error: None,
        config: config.clone(),
        n_train: train_data.len(),
        n_test: data.test.len(),
        n_features: train_data.n_features(),
        schedule: Some(schedule.to_named_json(train_data.class_names(), train_data.attribute_names())),
        train: Some(train),
        test: Some(test),
        validation,
        gaps: Some(gaps),
        certificate,
        grid,
        wall_time_s: 0.0,
    })
}

type Reports = (FairnessReport, FairnessReport, Option<FairnessReport>);

fn reports<C>(classifier: &C, data: &PreparedData, kind: fifa_core::ConstraintKind) -> Result<Reports>
where
    C: fifa_core::metrics::Classifier<f64>,
{
    Ok((
        evaluate(classifier, &data.train, kind)?,
        evaluate(classifier, &data.test, kind)?,
        data.validation
            .as_ref()
            .map(|v| evaluate(classifier, v, kind))
            .transpose()?,
    ))
}

/// Append records to a JSON-lines file, creating parent directories.
pub fn write_jsonl(path: &Path, records: &[RunRecord]) -> Result<()> {
    use std::io::Write;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    for r in records {
        writeln!(f, "{}", r.to_json_line()?).map_err(|e| CliError::io(path, e))?;
    }
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<RunRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}
