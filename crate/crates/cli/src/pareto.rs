//! Non-dominated runs under (balanced error, fairness violation).

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::experiment::RunRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    /// Position of the record in the input list.
    pub index: usize,
    pub c_margin: f64,
    pub alpha: f64,
    pub seed: u64,
    pub balanced_error: f64,
    pub fairness_violation: f64,
    pub combined_loss: f64,
}

/// `a` dominates `b`: no worse in both objectives and better in one.
pub fn dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.0 && a.1 <= b.1 && (a.0 < b.0 || a.1 < b.1)
}

/// Indices of the non-dominated points, sorted by the first objective (then
/// the second, then index). Duplicate points are all kept. NaN points are skipped.
pub fn frontier_indices(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len())
        .filter(|&i| !points[i].0.is_nan() && !points[i].1.is_nan())
        .collect();
    order.sort_by(|&i, &j| {
        points[i]
            .0
            .total_cmp(&points[j].0)
            .then(points[i].1.total_cmp(&points[j].1))
            .then(i.cmp(&j))
    });
    // Anything earlier in this order has a no-larger first objective, so a
    // point is dominated exactly when an earlier one beats it on the second,
    // or ties it there with a strictly smaller first.
    let mut kept = Vec::new();
    let mut best: Option<(f64, f64)> = None; // (lowest second objective, first objective where it was reached)
    for i in order {
        let (x, y) = points[i];
        let dominated = best.is_some_and(|(by, bx)| by < y || (by == y && bx < x));
        if !dominated {
            kept.push(i);
        }
        if best.is_none_or(|(by, _)| y < by) {
            best = Some((y, x));
        }
    }
    kept
}

/// Frontier of successful records on the chosen split.
pub fn pareto(records: &[RunRecord], split: Split) -> Result<Vec<FrontierPoint>> {
    if records.is_empty() {
        return Err(CliError::NoRecords);
    }
    let report = |r: &RunRecord| match split {
        Split::Train => r.train.clone(),
        Split::Test => r.test.clone(),
    };
    let points: Vec<(f64, f64)> = records
        .iter()
        .map(|r| {
            report(r)
                .filter(|_| r.is_ok())
                .map_or((f64::NAN, f64::NAN), |t| (t.balanced_error, t.fairness_violation))
        })
        .collect();
    Ok(frontier_indices(&points)
        .into_iter()
        .map(|i| {
            let r = &records[i];
            let t = report(r).expect("frontier points have reports");
            FrontierPoint {
                index: i,
                c_margin: r.config.c_margin,
                alpha: r.config.alpha,
                seed: r.config.seed,
                balanced_error: t.balanced_error,
                fairness_violation: t.fairness_violation,
                combined_loss: t.combined_loss,
            }
        })
        .collect())
}
