//! Subgroup-aware margin schedules.
//!
//! Each `(class, attribute)` cell gets a margin `Δ_{i,a} = C / ñ_i^{1/4} + δ_{i,a}`.
//! `ñ_i` is the class sample size shrunk by how unevenly the class is spread
//! over attribute groups. `δ_{i,a}` are non-negative offsets, and the largest
//! cell of a class always has `δ = 0`; smaller cells get larger offsets.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledDataset, SubgroupCounts};
use crate::error::{Error, Result};
use crate::kind::ConstraintKind;
use crate::model::ScoreFunction;
use crate::scalar::Scalar;

/// Adjusted sample size `ñ_i` of one class.
///
/// Evaluates `n_i Π_a n_{i,a} / (√Π_a n_{i,a} + α Σ_j √(n_i Π_{a≠j} n_{i,a}))²` in
/// the equivalent form `n_i / (1 + α Σ_a √(n_i / n_{i,a}))²`, which never forms
/// the products and so cannot overflow. With `α = 0` it returns `n_i` exactly.
/// Under [`ConstraintKind::EqOpt`] only the positive class (index 1) is adjusted.
pub fn adjusted_size(counts: &SubgroupCounts, alpha: f64, kind: ConstraintKind, class: usize) -> Result<f64> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be finite and non-negative, got {alpha}")));
    }
    if class >= counts.n_classes() {
        return Err(Error::invalid(format!(
            "class {class} out of range for {} classes",
            counts.n_classes()
        )));
    }
    if kind == ConstraintKind::EqOpt && counts.n_classes() != 2 {
        return Err(Error::invalid("equalized opportunity needs binary labels"));
    }
    let n = counts.per_class[class];
    if kind == ConstraintKind::EqOpt && class == 0 {
        if n == 0 {
            return Err(Error::MissingClass(0));
        }
        return Ok(n as f64);
    }
    if let Some(a) = counts.per_cell[class].iter().position(|&c| c == 0) {
        return Err(Error::EmptyCell { class, attribute: a });
    }
    let n = n as f64;
    let spread: f64 = counts.per_cell[class].iter().map(|&c| (n / c as f64).sqrt()).sum();
    let denom = 1.0 + alpha * spread;
    Ok(n / (denom * denom))
}

/// `ñ_i^{-1/4}` rescaled so the largest entry is 1.
pub fn class_margin_ratio(adjusted_sizes: &[f64]) -> Result<Vec<f64>> {
    if let Some(v) = adjusted_sizes.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::invalid(format!("adjusted sizes must be positive, got {v}")));
    }
    let raw: Vec<f64> = adjusted_sizes.iter().map(|&v| v.powf(-0.25)).collect();
    let top = raw.iter().copied().fold(0.0, f64::max);
    Ok(raw.into_iter().map(|r| r / top).collect())
}

/// Hand offset levels to the cells of one class: the largest cell gets
/// `levels[0] = 0`, the next largest `levels[1]`, and so on. Equal counts go
/// to the lower attribute code first.
pub fn assign_deltas(counts: &SubgroupCounts, class: usize, levels: &[f64]) -> Result<Vec<f64>> {
    let m = counts.n_attributes();
    if class >= counts.n_classes() {
        return Err(Error::invalid(format!("class {class} out of range")));
    }
    if levels.len() != m {
        return Err(Error::Dimension(format!("{} delta levels for {m} attribute groups", levels.len())));
    }
    if levels.first() != Some(&0.0) {
        return Err(Error::invalid("the first delta level must be 0"));
    }
    if levels.iter().any(|v| !v.is_finite()) || levels.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("delta levels must be finite and sorted non-decreasing"));
    }
    let row = &counts.per_cell[class];
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| row[b].cmp(&row[a]).then(a.cmp(&b)));
    let mut deltas = vec![0.0; m];
    for (rank, &a) in order.iter().enumerate() {
        deltas[a] = levels[rank];
    }
    Ok(deltas)
}

/// Margins `Δ_{i,a}` together with the quantities they were built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginSchedule {
    pub c: f64,
    pub alpha: f64,
    pub kind: ConstraintKind,
    /// `ñ_i`, one per class.
    pub adjusted_sizes: Vec<f64>,
    /// `δ_{i,a}`, shape `k x m`.
    pub deltas: Vec<Vec<f64>>,
    /// `Δ_{i,a}`, shape `k x m`.
    pub delta: Vec<Vec<f64>>,
}

impl MarginSchedule {
    /// The all-zero schedule: training with it is ordinary training.
    pub fn zeros(n_classes: usize, n_attributes: usize, kind: ConstraintKind) -> Self {
        Self {
            c: 0.0,
            alpha: 0.0,
            kind,
            adjusted_sizes: vec![1.0; n_classes],
            deltas: vec![vec![0.0; n_attributes]; n_classes],
            delta: vec![vec![0.0; n_attributes]; n_classes],
        }
    }

    /// A schedule with arbitrary non-negative margins (stored as `δ` with `C = 0`).
    pub fn from_margins(delta: Vec<Vec<f64>>, kind: ConstraintKind) -> Result<Self> {
        let m = delta.first().map_or(0, Vec::len);
        if delta.iter().any(|r| r.len() != m) {
            return Err(Error::Dimension("ragged margin matrix".into()));
        }
        if delta.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("margins must be finite and non-negative"));
        }
        Ok(Self {
            c: 0.0,
            alpha: 0.0,
            kind,
            adjusted_sizes: vec![1.0; delta.len()],
            deltas: delta.clone(),
            delta,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.delta.len()
    }

    pub fn n_attributes(&self) -> usize {
        self.delta.first().map_or(0, Vec::len)
    }

    pub fn is_zero(&self) -> bool {
        self.delta.iter().flatten().all(|&v| v == 0.0)
    }

    /// `Δ_{class, attribute}`, or an error when the cell is outside the schedule.
    pub fn margin(&self, class: usize, attribute: usize) -> Result<f64> {
        self.delta
            .get(class)
            .and_then(|r| r.get(attribute))
            .copied()
            .ok_or_else(|| {
                Error::Dimension(format!(
                    "schedule is {}x{}, no cell ({class}, {attribute})",
                    self.n_classes(),
                    self.n_attributes()
                ))
            })
    }

    /// Check that every `(y, a)` of a dataset has a margin.
    pub fn covers<T: Scalar>(&self, data: &LabeledDataset<T>) -> Result<()> {
        if data.n_classes() > self.n_classes() || data.n_attributes() > self.n_attributes() {
            return Err(Error::Dimension(format!(
                "schedule is {}x{} but data has {} classes and {} groups",
                self.n_classes(),
                self.n_attributes(),
                data.n_classes(),
                data.n_attributes()
            )));
        }
        Ok(())
    }

    /// `Δ` as a JSON object keyed by class name, then attribute name.
    pub fn to_named_json(&self, class_names: &[String], attribute_names: &[String]) -> serde_json::Value {
        let mut outer = serde_json::Map::new();
        for (i, row) in self.delta.iter().enumerate() {
            let mut inner = serde_json::Map::new();
            for (a, &v) in row.iter().enumerate() {
                let key = attribute_names.get(a).cloned().unwrap_or_else(|| a.to_string());
                inner.insert(key, serde_json::json!(v));
            }
            let key = class_names.get(i).cloned().unwrap_or_else(|| i.to_string());
            outer.insert(key, serde_json::Value::Object(inner));
        }
        serde_json::Value::Object(outer)
    }
}

/// Build `Δ_{i,a} = C/ñ_i^{1/4} + δ_{i,a}`, with `delta_levels[i]` handed out
/// to the cells of class `i` by [`assign_deltas`].
pub fn build_schedule(
    counts: &SubgroupCounts,
    c: f64,
    alpha: f64,
    delta_levels: &[Vec<f64>],
    kind: ConstraintKind,
) -> Result<MarginSchedule> {
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::invalid(format!("C must be finite and non-negative, got {c}")));
    }
    let k = counts.n_classes();
    if delta_levels.len() != k {
        return Err(Error::Dimension(format!("{} level sets for {k} classes", delta_levels.len())));
    }
    let adjusted_sizes = (0..k)
        .map(|i| adjusted_size(counts, alpha, kind, i))
        .collect::<Result<Vec<_>>>()?;
    let deltas = (0..k)
        .map(|i| assign_deltas(counts, i, &delta_levels[i]))
        .collect::<Result<Vec<_>>>()?;
    let delta = adjusted_sizes
        .iter()
        .zip(&deltas)
        .map(|(&n, row)| {
            let base = c / n.powf(0.25);
            row.iter().map(|&d| base + d).collect()
        })
        .collect();
    Ok(MarginSchedule {
        c,
        alpha,
        kind,
        adjusted_sizes,
        deltas,
        delta,
    })
}

/// Smallest observed margins `f(x)_y − max_{l≠y} f(x)_l`. Cells without
/// samples are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginDiagnostics {
    pub class_margins: Vec<Option<f64>>,
    pub cell_margins: Vec<Vec<Option<f64>>>,
}

fn sample_margin<T: Scalar>(scores: &[T], y: usize) -> f64 {
    let rival = scores
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != y)
        .map(|(_, &s)| s)
        .fold(T::neg_infinity(), T::max);
    (scores[y] - rival).to_f64_lossy()
}

fn min_opt(a: Option<f64>, b: f64) -> Option<f64> {
    Some(match a {
        Some(v) => match v.partial_cmp(&b) {
            Some(Ordering::Greater) => b,
            _ => v,
        },
        None => b,
    })
}

pub fn empirical_margins<T: Scalar, S: ScoreFunction<T> + ?Sized>(
    scorer: &S,
    data: &LabeledDataset<T>,
) -> Result<MarginDiagnostics> {
    let mut cell_margins = vec![vec![None; data.n_attributes()]; data.n_classes()];
    for j in 0..data.len() {
        let scores = scorer.scores(data.row(j))?;
        let (y, a) = (data.labels()[j], data.attributes()[j]);
        if y >= scores.len() {
            return Err(Error::Dimension(format!(
                "label {y} but scorer has {} outputs",
                scores.len()
            )));
        }
        cell_margins[y][a] = min_opt(cell_margins[y][a], sample_margin(&scores, y));
    }
    let class_margins = cell_margins
        .iter()
        .map(|row| row.iter().flatten().fold(None, |acc, &v| min_opt(acc, v)))
        .collect();
    Ok(MarginDiagnostics {
        class_margins,
        cell_margins,
    })
}
