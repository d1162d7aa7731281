//! Balanced error, fairness violations and the combined loss.
//!
//! Every metric is a function of the expected confusion tensor
//! `count[y][a][ŷ]`, so randomized classifiers are handled by weighting each
//! member's counts by its mixture probability.

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::kind::ConstraintKind;
use crate::model::LinearScorer;
use crate::scalar::Scalar;

/// Something that yields predictions as a probability mixture of hard labelings.
pub trait Classifier<T: Scalar> {
    /// `(probability, predictions)` per member.
    fn prediction_mixture(&self, data: &LabeledDataset<T>) -> Result<Vec<(f64, Vec<usize>)>>;
}

impl<T: Scalar> Classifier<T> for LinearScorer<T> {
    fn prediction_mixture(&self, data: &LabeledDataset<T>) -> Result<Vec<(f64, Vec<usize>)>> {
        Ok(vec![(1.0, self.predict_all(data)?)])
    }
}

/// Expected confusion counts split by attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct Confusion {
    k: usize,
    m: usize,
    /// `count[(y * m + a) * k + ŷ]`
    count: Vec<f64>,
    /// Row count of every `(y, a)` cell.
    cell: Vec<usize>,
}

impl Confusion {
    pub fn new<T: Scalar>(data: &LabeledDataset<T>, members: &[(f64, Vec<usize>)]) -> Result<Self> {
        let (k, m) = (data.n_classes(), data.n_attributes());
        let mut cell = vec![0usize; k * m];
        for (&y, &a) in data.labels().iter().zip(data.attributes()) {
            cell[y * m + a] += 1;
        }
        let mut count = vec![0.0; k * m * k];
        for (q, preds) in members {
            if preds.len() != data.len() {
                return Err(Error::Dimension(format!(
                    "{} predictions for {} rows",
                    preds.len(),
                    data.len()
                )));
            }
            if let Some(&p) = preds.iter().find(|&&p| p >= k) {
                return Err(Error::invalid(format!("prediction {p} out of range for {k} classes")));
            }
            let mut own = vec![0usize; k * m * k];
            for ((&y, &a), &p) in data.labels().iter().zip(data.attributes()).zip(preds) {
                own[(y * m + a) * k + p] += 1;
            }
            for (c, &o) in count.iter_mut().zip(&own) {
                *c += q * o as f64;
            }
        }
        Ok(Self { k, m, count, cell })
    }

    pub fn from_predictions<T: Scalar>(data: &LabeledDataset<T>, preds: &[usize]) -> Result<Self> {
        Self::new(data, &[(1.0, preds.to_vec())])
    }

    pub fn n_classes(&self) -> usize {
        self.k
    }

    pub fn n_attributes(&self) -> usize {
        self.m
    }

    /// Expected number of rows in cell `(y, a)` predicted as `pred`.
    pub fn count(&self, y: usize, a: usize, pred: usize) -> f64 {
        self.count[(y * self.m + a) * self.k + pred]
    }

    pub fn cell_size(&self, y: usize, a: usize) -> usize {
        self.cell[y * self.m + a]
    }

    fn class_size(&self, y: usize) -> usize {
        (0..self.m).map(|a| self.cell_size(y, a)).sum()
    }

    fn group_size(&self, a: usize) -> usize {
        (0..self.k).map(|y| self.cell_size(y, a)).sum()
    }

    /// `P̂(ŷ = y | Y = y, A = a)`.
    pub fn cell_hit_rate(&self, y: usize, a: usize) -> Result<f64> {
        let n = self.cell_size(y, a);
        if n == 0 {
            return Err(Error::EmptyCell { class: y, attribute: a });
        }
        Ok(self.count(y, a, y) / n as f64)
    }

    /// `P̂(ŷ = i | A = a)`.
    pub fn group_rate(&self, i: usize, a: usize) -> Result<f64> {
        let n = self.group_size(a);
        if n == 0 {
            return Err(Error::EmptyGroup(a));
        }
        let hits: f64 = (0..self.k).map(|y| self.count(y, a, i)).sum();
        Ok(hits / n as f64)
    }

    pub fn balanced_error(&self) -> Result<f64> {
        let mut acc = 0.0;
        for y in 0..self.k {
            let n = self.class_size(y);
            if n == 0 {
                return Err(Error::MissingClass(y));
            }
            let hits: f64 = (0..self.m).map(|a| self.count(y, a, y)).sum();
            acc += 1.0 - hits / n as f64;
        }
        Ok(acc / self.k as f64)
    }

    /// Fraction of all rows misclassified.
    pub fn total_error(&self) -> f64 {
        let n: usize = self.cell.iter().sum();
        let mut hits = 0.0;
        for y in 0..self.k {
            for a in 0..self.m {
                hits += self.count(y, a, y);
            }
        }
        1.0 - hits / n.max(1) as f64
    }

    /// Adds `|r_a − r_b|` for every pair `a < b` to `acc`, one term at a time.
    fn add_pairwise(acc: &mut f64, rates: &[f64]) {
        for a in 0..rates.len() {
            for b in a + 1..rates.len() {
                *acc += (rates[a] - rates[b]).abs();
            }
        }
    }

    pub fn eo_violation(&self) -> Result<f64> {
        let mut acc = 0.0;
        for y in 0..self.k {
            let rates = (0..self.m).map(|a| self.cell_hit_rate(y, a)).collect::<Result<Vec<_>>>()?;
            Self::add_pairwise(&mut acc, &rates);
        }
        Ok(acc)
    }

    pub fn eqopt_violation(&self) -> Result<f64> {
        if self.k != 2 {
            return Err(Error::invalid(format!(
                "equalized opportunity needs binary labels, got {} classes",
                self.k
            )));
        }
        let rates = (0..self.m).map(|a| self.cell_hit_rate(1, a)).collect::<Result<Vec<_>>>()?;
        let mut acc = 0.0;
        Self::add_pairwise(&mut acc, &rates);
        Ok(acc)
    }

    pub fn dp_violation(&self) -> Result<f64> {
        let mut acc = 0.0;
        for i in 0..self.k {
            let rates = (0..self.m).map(|a| self.group_rate(i, a)).collect::<Result<Vec<_>>>()?;
            Self::add_pairwise(&mut acc, &rates);
        }
        Ok(acc)
    }

    pub fn violation(&self, kind: ConstraintKind) -> Result<f64> {
        match kind {
            ConstraintKind::Eo => self.eo_violation(),
            ConstraintKind::EqOpt => self.eqopt_violation(),
            ConstraintKind::Dp => self.dp_violation(),
        }
    }

    /// Rates the violation of `kind` is built from, shape `k x m`; `None` for empty cells.
    pub fn rate_table(&self, kind: ConstraintKind) -> Vec<Vec<Option<f64>>> {
        (0..self.k)
            .map(|i| {
                (0..self.m)
                    .map(|a| match kind {
                        ConstraintKind::Dp => self.group_rate(i, a).ok(),
                        _ => self.cell_hit_rate(i, a).ok(),
                    })
                    .collect()
            })
            .collect()
    }

    pub fn report(&self, kind: ConstraintKind) -> Result<FairnessReport> {
        let balanced_error = self.balanced_error()?;
        let fairness_violation = self.violation(kind)?;
        Ok(FairnessReport {
            kind,
            balanced_error,
            fairness_violation,
            combined_loss: combined_loss(balanced_error, fairness_violation),
            total_error: self.total_error(),
            per_cell_rates: self.rate_table(kind),
        })
    }
}

pub fn balanced_error<T: Scalar>(preds: &[usize], data: &LabeledDataset<T>) -> Result<f64> {
    Confusion::from_predictions(data, preds)?.balanced_error()
}

/// `Σ_i Σ_{a<a'} |P̂(ŷ=i | Y=i, A=a) − P̂(ŷ=i | Y=i, A=a')|`.
pub fn eo_violation<T: Scalar>(preds: &[usize], data: &LabeledDataset<T>) -> Result<f64> {
    Confusion::from_predictions(data, preds)?.eo_violation()
}

/// Pairwise gaps in the positive-class hit rate across groups.
pub fn eqopt_violation<T: Scalar>(preds: &[usize], data: &LabeledDataset<T>) -> Result<f64> {
    Confusion::from_predictions(data, preds)?.eqopt_violation()
}

/// `Σ_i Σ_{a<a'} |P̂(ŷ=i | A=a) − P̂(ŷ=i | A=a')|`.
pub fn dp_violation<T: Scalar>(preds: &[usize], data: &LabeledDataset<T>) -> Result<f64> {
    Confusion::from_predictions(data, preds)?.dp_violation()
}

pub fn combined_loss(balanced_error: f64, fairness_violation: f64) -> f64 {
    0.5 * balanced_error + 0.5 * fairness_violation
}

pub fn generalization_gap(train_value: f64, test_value: f64) -> f64 {
    (test_value - train_value).abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub kind: ConstraintKind,
    pub balanced_error: f64,
    pub fairness_violation: f64,
    pub combined_loss: f64,
    pub total_error: f64,
    /// Hit rates `P̂(ŷ=i | Y=i, A=a)` for EO/EqOpt, prediction rates `P̂(ŷ=i | A=a)` for DP.
    pub per_cell_rates: Vec<Vec<Option<f64>>>,
}

/// Report for a scorer or randomized classifier; mixtures use expected counts.
pub fn evaluate<T: Scalar, C: Classifier<T> + ?Sized>(
    classifier: &C,
    data: &LabeledDataset<T>,
    kind: ConstraintKind,
) -> Result<FairnessReport> {
    Confusion::new(data, &classifier.prediction_mixture(data)?)?.report(kind)
}
