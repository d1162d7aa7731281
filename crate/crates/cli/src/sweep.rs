//! Hyper-parameter sweeps over the margin schedule.
//!
//! Trial `i` draws its seed and its `(C, α, δ)` from named streams under the
//! base seed, so the table is the same however the trials are scheduled.

use std::path::Path;

use fifa_core::rng;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Selection, Strategy, SweepConfig};
use crate::error::{CliError, Result};
use crate::experiment::{prepare, run_prepared, PreparedData, RunRecord};

/// Margin settings and seed of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialPlan {
    pub trial: usize,
    pub config: ExperimentConfig,
}

fn lerp([lo, hi]: [f64; 2], t: f64) -> f64 {
    lo + (hi - lo) * t
}

/// Configs for every trial of `sweep`, in trial order.
pub fn plan(sweep: &SweepConfig, n_classes: usize, n_attributes: usize) -> Vec<TrialPlan> {
    let free = n_attributes.saturating_sub(1);
    let dims = 2 + n_classes * free;
    (0..sweep.budget)
        .map(|trial| {
            let mut config = sweep.base.clone();
            config.seed = rng::derive_seed(sweep.base.seed, "trial", trial as u64);
            if sweep.vary_margins {
                let unit = match sweep.strategy {
                    Strategy::SeededRandom => {
                        let mut r = rng::stream(sweep.base.seed, "sweep", trial as u64);
                        (0..dims).map(|_| r.gen::<f64>()).collect()
                    }
                    Strategy::Grid => lattice_point(trial, sweep.budget, dims),
                };
                config.c_margin = lerp(sweep.c_range, unit[0]);
                config.alpha = lerp(sweep.alpha_range, unit[1]);
                let levels = (0..n_classes)
                    .map(|i| {
                        let mut row: Vec<f64> = unit[2 + i * free..2 + (i + 1) * free]
                            .iter()
                            .map(|&t| lerp(sweep.delta_range, t))
                            .collect();
                        row.sort_by(f64::total_cmp);
                        // the largest cell never gets an offset
                        row.insert(0, 0.0);
                        row
                    })
                    .collect();
                config.delta_levels = Some(levels);
                config.deltas.clear();
            }
            TrialPlan { trial, config }
        })
        .collect()
}

/// Point `i` of `budget` evenly strided through a lattice in `[0, 1]^dims`
/// with `g = ⌈budget^{1/dims}⌉` values per axis, including both ends.
fn lattice_point(i: usize, budget: usize, dims: usize) -> Vec<f64> {
    let mut g = 1usize;
    while (g as u128).pow(dims as u32) < budget as u128 {
        g += 1;
    }
    let total = (g as u128).pow(dims as u32);
    let mut idx = i as u128 * total / budget as u128;
    (0..dims)
        .map(|_| {
            let v = (idx % g as u128) as usize;
            idx /= g as u128;
            if g == 1 {
                0.0
            } else {
                v as f64 / (g - 1) as f64
            }
        })
        .collect()
}

/// One row of the trial table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub c_margin: f64,
    pub alpha: f64,
    /// Per-class offset levels, `;` between classes and `|` between levels.
    pub delta_levels: String,
    pub status: String,
    pub train_balanced: Option<f64>,
    pub train_fairness: Option<f64>,
    pub train_combined: Option<f64>,
    pub test_balanced: Option<f64>,
    pub test_fairness: Option<f64>,
    pub test_combined: Option<f64>,
    pub validation_combined: Option<f64>,
    pub best: bool,
}

impl TrialRow {
    fn from_record(trial: usize, r: &RunRecord) -> Self {
        let levels = r
            .config
            .delta_levels
            .as_ref()
            .map(|ls| {
                ls.iter()
                    .map(|row| row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("|"))
                    .collect::<Vec<_>>()
                    .join(";")
            })
            .unwrap_or_default();
        TrialRow {
            trial,
            seed: r.config.seed,
            c_margin: r.config.c_margin,
            alpha: r.config.alpha,
            delta_levels: levels,
            status: if r.is_ok() { "ok" } else { "failed" }.into(),
            train_balanced: r.train.as_ref().map(|t| t.balanced_error),
            train_fairness: r.train.as_ref().map(|t| t.fairness_violation),
            train_combined: r.train.as_ref().map(|t| t.combined_loss),
            test_balanced: r.test.as_ref().map(|t| t.balanced_error),
            test_fairness: r.test.as_ref().map(|t| t.fairness_violation),
            test_combined: r.test.as_ref().map(|t| t.combined_loss),
            validation_combined: r.validation.as_ref().map(|t| t.combined_loss),
            best: false,
        }
    }

    fn selection_loss(&self, selection: Selection) -> Option<f64> {
        match selection {
            Selection::Test => self.test_combined,
            Selection::Validation => self.validation_combined,
        }
    }
}

/// The best trial's headline numbers, laid out like a results table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub constraint: String,
    pub eps: f64,
    pub algorithm: String,
    pub trials: usize,
    pub failed: usize,
    pub best_trial: usize,
    pub train_combined: f64,
    pub train_fairness: f64,
    pub test_combined: f64,
    pub test_fairness: f64,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub records: Vec<RunRecord>,
    pub rows: Vec<TrialRow>,
    pub best: usize,
    pub summary: SweepSummary,
}

/// Index of the lowest selection loss among successful rows; ties keep the
/// earlier trial. Works from the table alone.
pub fn select_best(rows: &[TrialRow], selection: Selection) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, row) in rows.iter().enumerate() {
        if let Some(v) = row.selection_loss(selection).filter(|v| v.is_finite()) {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((i, v));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Load the base dataset once, then run every trial.
pub fn sweep(config: &SweepConfig) -> Result<SweepOutcome> {
    config.validate()?;
    let data = prepare(&config.base)?;
    sweep_prepared(config, &data)
}

/// Run every trial on `data` in a worker pool; results are merged by trial index.
pub fn sweep_prepared(config: &SweepConfig, data: &PreparedData) -> Result<SweepOutcome> {
    if config.budget == 0 {
        return Err(CliError::Config("budget must be at least 1".into()));
    }
    let plans = plan(config, data.train.n_classes(), data.train.n_attributes());
    let records: Vec<RunRecord> = plans.par_iter().map(|p| run_prepared(&p.config, data)).collect();
    let mut rows: Vec<TrialRow> = records
        .iter()
        .enumerate()
        .map(|(i, r)| TrialRow::from_record(i, r))
        .collect();
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    let selection = config.base.selection;
    let best = select_best(&rows, selection).ok_or(CliError::AllTrialsFailed(records.len()))?;
    rows[best].best = true;
    let winner = &records[best];
    let (train, test) = (winner.train.as_ref().unwrap(), winner.test.as_ref().unwrap());
    let summary = SweepSummary {
        constraint: config.base.constraint.to_string(),
        eps: config.base.eps,
        algorithm: config.base.algorithm.to_string(),
        trials: records.len(),
        failed,
        best_trial: best,
        train_combined: train.combined_loss,
        train_fairness: train.fairness_violation,
        test_combined: test.combined_loss,
        test_fairness: test.fairness_violation,
    };
    Ok(SweepOutcome {
        records,
        rows,
        best,
        summary,
    })
}

pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

pub fn read_trial_table(path: &Path) -> Result<Vec<TrialRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn rows_to_csv<R: Serialize>(rows: &[R]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plans_are_seeded_and_in_range() {
        let sweep = SweepConfig {
            budget: 12,
            ..SweepConfig::default()
        };
        let a = plan(&sweep, 2, 3);
        assert_eq!(a, plan(&sweep, 2, 3));
        for p in &a {
            let c = &p.config;
            assert!((0.0..=0.01).contains(&c.c_margin) && (0.0..=0.01).contains(&c.alpha));
            for row in c.delta_levels.as_ref().unwrap() {
                assert_eq!(row.len(), 3);
                assert_eq!(row[0], 0.0);
                assert!(row.windows(2).all(|w| w[0] <= w[1] && w[1] <= 0.01));
            }
        }
        let seeds: std::collections::BTreeSet<u64> = a.iter().map(|p| p.config.seed).collect();
        assert_eq!(seeds.len(), 12);
    }

    #[test]
    fn fixed_margins_move_only_the_seed() {
        let mut sweep = SweepConfig {
            budget: 3,
            vary_margins: false,
            ..SweepConfig::default()
        };
        sweep.base.c_margin = 0.004;
        for p in plan(&sweep, 2, 2) {
            assert_eq!(p.config.c_margin, 0.004);
            assert_eq!(p.config.delta_levels, None);
        }
    }

    #[test]
    fn lattice_covers_corners() {
        let pts: Vec<Vec<f64>> = (0..4).map(|i| lattice_point(i, 4, 2)).collect();
        assert_eq!(pts, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]);
        assert_eq!(lattice_point(0, 1, 3), vec![0.0; 3]);
    }
}
