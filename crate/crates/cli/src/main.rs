use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fifa_cli::config::{overlay_file, Algorithm, DeltaCell, ExperimentConfig, Selection, Strategy, SweepConfig};
use fifa_cli::experiment::{self, write_jsonl};
use fifa_cli::pareto::{self, Split};
use fifa_cli::reports::{census_report, gaussian_check};
use fifa_cli::sweep::{rows_to_csv, write_csv};
use fifa_cli::{CliError, Result};
use fifa_core::dataset::{self, TableSchema};
use fifa_core::{ConstraintKind, LossKind};

#[derive(Parser)]
#[command(name = "fifa", version, about = "Fairness-aware margin training experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate one configuration; prints one JSON record.
    Run(RunArgs),
    /// Run a margin sweep and pick the best trial.
    Sweep(SweepArgs),
    /// Non-dominated records from a JSON-lines file.
    Pareto(ParetoArgs),
    /// Closed-form comparison on a two-group Gaussian mixture.
    GaussianCheck(GaussianArgs),
    /// Subgroup counts and adjusted sizes of a table.
    Census(CensusArgs),
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Training table (or the only table, split by --split-ratio).
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    test_dataset: Option<PathBuf>,
    /// TOML table schema (label, attribute, drop, ...).
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    label_col: Option<String>,
    #[arg(long)]
    attr_col: Option<String>,
    /// Column to ignore; repeatable.
    #[arg(long = "drop")]
    drop: Vec<String>,
    #[arg(long)]
    split_ratio: Option<f64>,
}

impl DataArgs {
    fn apply(&self, c: &mut ExperimentConfig) {
        let d = &mut c.dataset;
        if let Some(p) = &self.dataset {
            d.train = p.clone();
        }
        if self.test_dataset.is_some() {
            d.test = self.test_dataset.clone();
        }
        if self.schema.is_some() {
            d.schema_file = self.schema.clone();
        }
        if let Some(l) = &self.label_col {
            d.schema.label = l.clone();
        }
        if let Some(a) = &self.attr_col {
            d.schema.attribute = a.clone();
        }
        d.schema.drop.extend(self.drop.iter().cloned());
        if let Some(r) = self.split_ratio {
            d.split_ratio = r;
        }
    }
}

#[derive(Args, Clone)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "eo")]
    constraint: ConstraintKind,
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    #[arg(long, value_enum, default_value_t = Algorithm::ExpGrad)]
    algorithm: Algorithm,
    #[arg(long, default_value = "ce")]
    loss: LossKind,
    #[arg(long, default_value_t = 0.0)]
    c_margin: f64,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Explicit offset `class:attribute:value`; repeatable.
    #[arg(long = "delta")]
    delta: Vec<DeltaCell>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Selection::Test)]
    selection: Selection,
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML experiment config; its values override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl RunArgs {
    fn experiment(&self) -> Result<ExperimentConfig> {
        let mut c = ExperimentConfig {
            constraint: self.constraint,
            eps: self.eps,
            algorithm: self.algorithm,
            loss: self.loss,
            c_margin: self.c_margin,
            alpha: self.alpha,
            deltas: self.delta.clone(),
            seed: self.seed,
            selection: self.selection,
            out: self.out.clone(),
            ..ExperimentConfig::default()
        };
        self.data.apply(&mut c);
        match &self.config {
            Some(path) => overlay_file(&c, path),
            None => Ok(c),
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, default_value_t = 30)]
    budget: usize,
    #[arg(long, value_enum, default_value_t = Strategy::SeededRandom)]
    strategy: Strategy,
    /// Keep the margins from the base config and vary only the seed.
    #[arg(long)]
    fixed_margins: bool,
    /// TOML sweep config (with a `[base]` table); overrides the flags.
    #[arg(long)]
    sweep_config: Option<PathBuf>,
}

#[derive(Args)]
struct ParetoArgs {
    /// JSON-lines run records.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Split::Test)]
    split: Split,
    /// Write the frontier CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GaussianArgs {
    /// Comma-separated mean of group 1.
    #[arg(long, default_value = "0,0")]
    mu1: String,
    #[arg(long, default_value = "0,1")]
    mu2: String,
    #[arg(long, default_value = "8,0")]
    beta: String,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Class-0 group counts `n01,n02`.
    #[arg(long, default_value = "1000,1000")]
    class0: String,
    /// Class-1 group counts `n11,n12`.
    #[arg(long, default_value = "19800,200")]
    class1: String,
}

#[derive(Args)]
struct CensusArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value = "eo")]
    constraint: ConstraintKind,
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|v| v.trim().parse().map_err(|_| CliError::Config(format!("bad {what} `{s}`"))))
        .collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io { path: dir.into(), source: e })?;
    }
    std::fs::write(path, text).map_err(|e| CliError::Io { path: path.into(), source: e })
}

fn cmd_run(args: &RunArgs) -> Result<bool> {
    let config = args.experiment()?;
    let record = experiment::run(&config);
    println!("{}", record.to_json_line()?);
    if let Some(dir) = &config.out {
        write_jsonl(&dir.join("record.jsonl"), std::slice::from_ref(&record))?;
    }
    if let Some(e) = &record.error {
        eprintln!("run failed: {e}");
    }
    Ok(record.is_ok())
}

fn cmd_sweep(args: &SweepArgs) -> Result<bool> {
    let mut config = SweepConfig {
        base: args.run.experiment()?,
        budget: args.budget,
        strategy: args.strategy,
        vary_margins: !args.fixed_margins,
        ..SweepConfig::default()
    };
    if let Some(path) = &args.sweep_config {
        config = overlay_file(&config, path)?;
    }
    let outcome = fifa_cli::sweep(&config)?;
    print!("{}", rows_to_csv(std::slice::from_ref(&outcome.summary))?);
    if let Some(dir) = &config.base.out {
        write_jsonl(&dir.join("records.jsonl"), &outcome.records)?;
        write_csv(&dir.join("trials.csv"), &outcome.rows)?;
        write_csv(&dir.join("summary.csv"), std::slice::from_ref(&outcome.summary))?;
    }
    Ok(true)
}

fn cmd_pareto(args: &ParetoArgs) -> Result<bool> {
    let records = experiment::read_jsonl(&args.input)?;
    let frontier = pareto::pareto(&records, args.split)?;
    let text = rows_to_csv(&frontier)?;
    match &args.out {
        Some(p) => write_text(p, &text)?,
        None => print!("{text}"),
    }
    Ok(true)
}

fn cmd_gaussian(args: &GaussianArgs) -> Result<bool> {
    let cells = |s: &str| -> Result<[usize; 2]> {
        let v: Vec<usize> = parse_list(s, "group counts")?;
        v.try_into().map_err(|_| CliError::Config(format!("`{s}` needs two counts")))
    };
    let report = gaussian_check(
        parse_list(&args.mu1, "mu1")?,
        parse_list(&args.mu2, "mu2")?,
        parse_list(&args.beta, "beta")?,
        args.alpha,
        [cells(&args.class0)?, cells(&args.class1)?],
    )?;
    println!("{}", serde_json::to_string(&report)?);
    Ok(true)
}

fn cmd_census(args: &CensusArgs) -> Result<bool> {
    let mut c = ExperimentConfig::default();
    args.data.apply(&mut c);
    let path = args
        .data
        .dataset
        .as_ref()
        .ok_or_else(|| CliError::Config("--dataset is required".into()))?;
    let schema: TableSchema = c.dataset.resolved_schema()?;
    let data = dataset::load_table::<f64>(path, &schema)?;
    println!("{}", serde_json::to_string(&census_report(&data, args.alpha, args.constraint)?)?);
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Pareto(a) => cmd_pareto(a),
        Command::GaussianCheck(a) => cmd_gaussian(a),
        Command::Census(a) => cmd_census(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
