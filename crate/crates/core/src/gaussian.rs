//! Two-group Gaussian mixture with a closed-form performance criterion.
//!
//! Class 0 draws `x ~ N(μ_a, I)` and class 1 draws `x ~ N(μ_a + β, I)`, with
//! the group `a ∈ {1, 2}` picked by the class-conditional weights `π_{y,a}`.
//! For threshold rules `1{βᵀx > c}` the balanced error plus `α` times the
//! equalized-odds gap has a closed form in the normal CDF.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::dataset::{LabeledDataset, SubgroupCounts};
use crate::error::{Error, Result};
use crate::kind::ConstraintKind;
use crate::margins::adjusted_size;
use crate::model::LinearScorer;
use crate::rng;
use crate::scalar::Scalar;

/// Standard normal CDF.
pub fn phi(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub mu1: Vec<f64>,
    pub mu2: Vec<f64>,
    pub beta: Vec<f64>,
    /// `pi[y][a]`: group weights within class `y`; each row sums to 1.
    pub pi: [[f64; 2]; 2],
    pub alpha: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl GaussianSpec {
    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.dim();
        if p == 0 || self.mu1.len() != p || self.mu2.len() != p {
            return Err(Error::Dimension("means and beta must share a positive dimension".into()));
        }
        if self.beta.iter().all(|&b| b == 0.0) {
            return Err(Error::invalid("beta must be nonzero"));
        }
        for row in &self.pi {
            if row.iter().any(|&v| !(v >= 0.0)) || (row[0] + row[1] - 1.0).abs() > 1e-12 {
                return Err(Error::invalid("each row of pi must be non-negative and sum to 1"));
            }
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid("alpha must be non-negative"));
        }
        Ok(())
    }

    fn means(&self) -> [&[f64]; 2] {
        [&self.mu1, &self.mu2]
    }

    pub fn beta_norm(&self) -> f64 {
        dot(&self.beta, &self.beta).sqrt()
    }
}

/// `1{βᵀx > c}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdClassifier {
    pub c: f64,
    pub beta: Vec<f64>,
}

impl ThresholdClassifier {
    pub fn predict(&self, x: &[f64]) -> usize {
        usize::from(dot(&self.beta, x) > self.c)
    }

    pub fn predict_all(&self, data: &LabeledDataset<f64>) -> Vec<usize> {
        data.rows().map(|x| self.predict(x)).collect()
    }

    /// Equivalent two-class linear scorer with scores `(0, βᵀx − c)`.
    pub fn to_scorer(&self) -> LinearScorer<f64> {
        let d = self.beta.len();
        let mut w = vec![0.0; 2 * d];
        w[d..].copy_from_slice(&self.beta);
        LinearScorer::from_parts(2, d, w, Some(vec![0.0, -self.c]), false).expect("finite parameters")
    }
}

/// Balanced error plus `α` times the equalized-odds gap of `1{βᵀx > c}`.
pub fn criterion_closed_form(spec: &GaussianSpec, c: f64) -> f64 {
    let norm = spec.beta_norm();
    let nb2 = norm * norm;
    let proj = spec.means().map(|m| dot(&spec.beta, m));
    // class-0 false-positive and class-1 false-negative rates per group
    let fp = proj.map(|p| phi((p - c) / norm));
    let fn_ = proj.map(|p| phi((c - p - nb2) / norm));
    let tp = proj.map(|p| phi((p + nb2 - c) / norm));
    let error = 0.5 * (spec.pi[0][0] * fp[0] + spec.pi[0][1] * fp[1])
        + 0.5 * (spec.pi[1][0] * fn_[0] + spec.pi[1][1] * fn_[1]);
    error + spec.alpha * (fp[0] - fp[1]).abs() + spec.alpha * (tp[0] - tp[1]).abs()
}

/// Population threshold `βᵀμ₁ + ‖β‖²/(1+γ)` for margin ratio `γ = γ₀/γ₁`.
pub fn threshold_for_ratio(spec: &GaussianSpec, gamma_ratio: f64) -> Result<f64> {
    if !(gamma_ratio > 0.0) {
        return Err(Error::invalid(format!("margin ratio must be positive, got {gamma_ratio}")));
    }
    let nb2 = dot(&spec.beta, &spec.beta);
    Ok(dot(&spec.beta, &spec.mu1) + nb2 / (1.0 + gamma_ratio))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example1Comparison {
    pub gamma_plain: f64,
    pub gamma_fifa: f64,
    pub c_plain: f64,
    pub c_fifa: f64,
    pub m_plain: f64,
    pub m_fifa: f64,
    pub fifa_wins: bool,
}

/// Class-balanced margins `(n₁/n₀)^{1/4}` against subgroup-aware margins
/// `(ñ₁/ñ₀)^{1/4}` (with `α` from the spec), each turned into a population
/// threshold and scored by [`criterion_closed_form`].
pub fn compare_example1(spec: &GaussianSpec, counts: &SubgroupCounts) -> Result<Example1Comparison> {
    spec.validate()?;
    if counts.n_classes() != 2 {
        return Err(Error::invalid("the comparison needs two classes"));
    }
    let n = |i: usize| counts.per_class[i] as f64;
    if n(0) == 0.0 || n(1) == 0.0 {
        return Err(Error::MissingClass(if n(0) == 0.0 { 0 } else { 1 }));
    }
    let gamma_plain = (n(1) / n(0)).powf(0.25);
    let adj0 = adjusted_size(counts, spec.alpha, ConstraintKind::Eo, 0)?;
    let adj1 = adjusted_size(counts, spec.alpha, ConstraintKind::Eo, 1)?;
    let gamma_fifa = (adj1 / adj0).powf(0.25);
    let c_plain = threshold_for_ratio(spec, gamma_plain)?;
    let c_fifa = threshold_for_ratio(spec, gamma_fifa)?;
    let m_plain = criterion_closed_form(spec, c_plain);
    let m_fifa = criterion_closed_form(spec, c_fifa);
    Ok(Example1Comparison {
        gamma_plain,
        gamma_fifa,
        c_plain,
        c_fifa,
        m_plain,
        m_fifa,
        fifa_wins: m_fifa < m_plain,
    })
}

/// Seeded draw of `n0` class-0 rows followed by `n1` class-1 rows. The
/// attribute code is the mixture component (0 for `μ₁`, 1 for `μ₂`).
pub fn sample<T: Scalar>(spec: &GaussianSpec, n0: usize, n1: usize, seed: u64) -> Result<LabeledDataset<T>> {
    spec.validate()?;
    if n0 == 0 || n1 == 0 {
        return Err(Error::invalid("sample counts must be positive"));
    }
    let p = spec.dim();
    let mut r = rng::stream(seed, "gaussian", 0);
    let mut features = Vec::with_capacity((n0 + n1) * p);
    let mut labels = Vec::with_capacity(n0 + n1);
    let mut attributes = Vec::with_capacity(n0 + n1);
    for (y, count) in [(0usize, n0), (1, n1)] {
        for _ in 0..count {
            let a = usize::from(r.gen::<f64>() >= spec.pi[y][0]);
            let mu = spec.means()[a];
            for i in 0..p {
                let z: f64 = r.sample(StandardNormal);
                let shift = if y == 1 { spec.beta[i] } else { 0.0 };
                features.push(T::lit(mu[i] + shift + z));
            }
            labels.push(y);
            attributes.push(a);
        }
    }
    LabeledDataset::new(
        features,
        (0..p).map(|i| format!("x{i}")).collect(),
        labels,
        attributes,
        vec!["0".into(), "1".into()],
        vec!["a1".into(), "a2".into()],
    )
}
