//! Logit-based losses and their margin-shifted (FIFA) versions.
//!
//! The shifted loss lowers the true-class logit by the cell margin `Δ_{y,a}`
//! before evaluating the ordinary loss, so a sample only stops contributing
//! once it clears its subgroup's margin. Competing logits are never touched.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::margins::MarginSchedule;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Misclassification indicator; evaluation only.
    ZeroOne,
    Hinge,
    SoftmaxCrossEntropy,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::ZeroOne => "zero_one",
            LossKind::Hinge => "hinge",
            LossKind::SoftmaxCrossEntropy => "ce",
        })
    }
}

impl FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "zero_one" | "01" => Ok(LossKind::ZeroOne),
            "hinge" => Ok(LossKind::Hinge),
            "ce" | "softmax_cross_entropy" => Ok(LossKind::SoftmaxCrossEntropy),
            other => Err(format!("unknown loss `{other}` (expected hinge or ce)")),
        }
    }
}

fn check(scores_len: usize, y: usize) -> Result<()> {
    if scores_len < 2 {
        return Err(Error::invalid("need at least two scores"));
    }
    if y >= scores_len {
        return Err(Error::invalid(format!("label {y} out of range for {scores_len} scores")));
    }
    Ok(())
}

/// Largest competing logit and the smallest index attaining it.
#[inline]
fn rival<T: Scalar>(scores: &[T], y: usize) -> (usize, T) {
    let mut best = (usize::MAX, T::neg_infinity());
    for (i, &s) in scores.iter().enumerate() {
        if i != y && (best.0 == usize::MAX || s > best.1) {
            best = (i, s);
        }
    }
    best
}

/// Loss of `scores` with the true logit lowered by `shift`. When `grad` is
/// given it receives the gradient with respect to `scores`.
#[inline]
pub(crate) fn shifted_loss<T: Scalar>(
    kind: LossKind,
    scores: &[T],
    y: usize,
    shift: T,
    grad: Option<&mut [T]>,
) -> T {
    let fy = scores[y] - shift;
    match kind {
        LossKind::ZeroOne => {
            if let Some(g) = grad {
                g.iter_mut().for_each(|v| *v = T::zero());
            }
            let (_, r) = rival(scores, y);
            if fy < r {
                T::one()
            } else {
                T::zero()
            }
        }
        LossKind::Hinge => {
            let (ri, r) = rival(scores, y);
            let value = r - fy;
            if let Some(g) = grad {
                g.iter_mut().for_each(|v| *v = T::zero());
                if value > T::zero() {
                    g[y] = -T::one();
                    g[ri] = T::one();
                }
            }
            value.max(T::zero())
        }
        LossKind::SoftmaxCrossEntropy if scores.len() == 2 => {
            // two classes: softplus of the rival-minus-true gap
            let z = scores[1 - y] - fy;
            let e = (-z.abs()).exp();
            if let Some(g) = grad {
                let p = if z >= T::zero() { T::one() / (T::one() + e) } else { e / (T::one() + e) };
                g[1 - y] = p;
                g[y] = -p;
            }
            z.max(T::zero()) + e.ln_1p()
        }
        LossKind::SoftmaxCrossEntropy => {
            let shifted = |i: usize| if i == y { fy } else { scores[i] };
            let top = (0..scores.len()).map(shifted).fold(T::neg_infinity(), T::max);
            let mut total = T::zero();
            for i in 0..scores.len() {
                total += (shifted(i) - top).exp();
            }
            if let Some(g) = grad {
                for (i, gi) in g.iter_mut().enumerate() {
                    *gi = (shifted(i) - top).exp() / total;
                }
                g[y] -= T::one();
            }
            top + total.ln() - fy
        }
    }
}

/// Unshifted loss of `scores` against label `y`.
pub fn base_loss<T: Scalar>(kind: LossKind, scores: &[T], y: usize) -> Result<T> {
    check(scores.len(), y)?;
    Ok(shifted_loss(kind, scores, y, T::zero(), None))
}

/// Loss with the true logit lowered by `Δ_{y,a}`.
pub fn fifa_loss<T: Scalar>(
    kind: LossKind,
    scores: &[T],
    y: usize,
    a: usize,
    schedule: &MarginSchedule,
) -> Result<T> {
    check(scores.len(), y)?;
    let shift = T::lit(schedule.margin(y, a)?);
    Ok(shifted_loss(kind, scores, y, shift, None))
}

/// Gradient of [`fifa_loss`] with respect to the scores. For the hinge the
/// subgradient is zero at the kink and ties among rivals go to the lowest index.
pub fn fifa_gradient<T: Scalar>(
    kind: LossKind,
    scores: &[T],
    y: usize,
    a: usize,
    schedule: &MarginSchedule,
) -> Result<Vec<T>> {
    if kind == LossKind::ZeroOne {
        return Err(Error::invalid("the zero-one loss has no gradient"));
    }
    check(scores.len(), y)?;
    let shift = T::lit(schedule.margin(y, a)?);
    let mut g = vec![T::zero(); scores.len()];
    shifted_loss(kind, scores, y, shift, Some(&mut g));
    Ok(g)
}
