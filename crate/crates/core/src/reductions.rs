//! Constrained training through cost-sensitive reductions.
//!
//! A fairness notion is written as linear constraints `M μ(h) ≤ ĉ` on
//! conditional means `μ_j(h) = P̂(h(X) = 1 | E_j)` over events `E_j`. Two
//! solvers use it:
//!
//! * [`expgrad`] runs exponentiated-gradient ascent on the Lagrange
//!   multipliers, calling a best-response trainer each round. It returns a
//!   randomized classifier and a measured saddle-point gap.
//! * [`grid_search`] trains one deterministic scorer per multiplier vector on
//!   a fixed grid and keeps the best feasible one.
//!
//! Both trainers use the margin-shifted loss. When a margin schedule is given,
//! moments and errors are measured on the margin-shifted predictor
//! `h_Δ(x, y, a) = 1{f(x)_1 − Δ_{1,a}[y=1] > f(x)_0 − Δ_{0,a}[y=0]}`. With an
//! all-zero schedule this is exactly the plain `argmax` prediction.

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::kind::ConstraintKind;
use crate::losses::LossKind;
use crate::margins::MarginSchedule;
use crate::metrics::{Classifier, Confusion, FairnessReport};
use crate::model::{train_on, LinearScorer, TrainConfig, TrainingMatrix};
use crate::scalar::Scalar;

/// Conditioning event: `label` / `attribute` of `None` match anything.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub label: Option<usize>,
    pub attribute: Option<usize>,
}

impl Event {
    pub fn contains(&self, y: usize, a: usize) -> bool {
        self.label.is_none_or(|l| l == y) && self.attribute.is_none_or(|v| v == a)
    }

    pub fn name(&self) -> String {
        let a = self.attribute.map_or("*".to_owned(), |v| v.to_string());
        match self.label {
            Some(y) => format!("({a},{y})"),
            None => format!("({a})"),
        }
    }
}

/// `sign · (μ_event − μ_reference) ≤ ĉ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRow {
    pub event: usize,
    pub reference: usize,
    pub sign: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSystem {
    pub kind: ConstraintKind,
    pub events: Vec<Event>,
    pub rows: Vec<ConstraintRow>,
    /// Row-major `|K| x |J|`.
    pub m: Vec<f64>,
    pub c: Vec<f64>,
    pub eps: Vec<f64>,
    pub c_hat: Vec<f64>,
}

impl ConstraintSystem {
    pub fn n_events(&self) -> usize {
        self.events.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// The uniform relaxation.
    pub fn epsilon(&self) -> f64 {
        self.eps.first().copied().unwrap_or(0.0)
    }

    pub fn coefficient(&self, row: usize, event: usize) -> f64 {
        self.m[row * self.events.len() + event]
    }

    /// `M μ − ĉ`.
    pub fn residual(&self, mu: &[f64]) -> Vec<f64> {
        let j = self.events.len();
        (0..self.rows.len())
            .map(|k| {
                let row = &self.m[k * j..(k + 1) * j];
                row.iter().zip(mu).map(|(a, b)| a * b).sum::<f64>() - self.c_hat[k]
            })
            .collect()
    }

    /// `Mᵀ λ`.
    pub fn transpose_apply(&self, lambda: &[f64]) -> Vec<f64> {
        let j = self.events.len();
        let mut out = vec![0.0; j];
        for (k, &l) in lambda.iter().enumerate() {
            for (o, &m) in out.iter_mut().zip(&self.m[k * j..(k + 1) * j]) {
                *o += l * m;
            }
        }
        out
    }

    /// Rows per event on `data`; every event must be non-empty.
    pub fn event_sizes<T: Scalar>(&self, data: &LabeledDataset<T>) -> Result<Vec<usize>> {
        let mut sizes = vec![0usize; self.events.len()];
        for (&y, &a) in data.labels().iter().zip(data.attributes()) {
            for (s, e) in sizes.iter_mut().zip(&self.events) {
                if e.contains(y, a) {
                    *s += 1;
                }
            }
        }
        if let Some(e) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::EmptyEvent(self.events[e].name()));
        }
        Ok(sizes)
    }
}

/// Events and paired `±` rows for `kind` over a binary-label dataset.
///
/// EO uses events `(a, y)` and `(*, y)` for both labels, DP uses `(a)` and
/// `(*)`, EqOpt keeps only the `y = 1` half of EO. Every row bounds the gap
/// between one group event and its reference by `eps`.
pub fn build_constraints<T: Scalar>(
    kind: ConstraintKind,
    data: &LabeledDataset<T>,
    eps: f64,
) -> Result<ConstraintSystem> {
    if data.n_classes() != 2 {
        return Err(Error::invalid(format!(
            "constraints need binary labels, got {} classes",
            data.n_classes()
        )));
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::invalid(format!("eps must be non-negative, got {eps}")));
    }
    let groups = data.n_attributes();
    let labels: Vec<Option<usize>> = match kind {
        ConstraintKind::Eo => vec![Some(0), Some(1)],
        ConstraintKind::EqOpt => vec![Some(1)],
        ConstraintKind::Dp => vec![None],
    };
    let mut events = Vec::new();
    let mut rows = Vec::new();
    for &label in &labels {
        let first = events.len();
        for a in 0..groups {
            events.push(Event {
                label,
                attribute: Some(a),
            });
        }
        let reference = events.len();
        events.push(Event { label, attribute: None });
        for a in 0..groups {
            for sign in [1.0, -1.0] {
                rows.push(ConstraintRow {
                    event: first + a,
                    reference,
                    sign,
                });
            }
        }
    }
    let j = events.len();
    let mut m = vec![0.0; rows.len() * j];
    for (k, r) in rows.iter().enumerate() {
        m[k * j + r.event] = r.sign;
        m[k * j + r.reference] = -r.sign;
    }
    let system = ConstraintSystem {
        kind,
        c: vec![0.0; rows.len()],
        eps: vec![eps; rows.len()],
        c_hat: vec![eps; rows.len()],
        events,
        rows,
        m,
    };
    system.event_sizes(data)?;
    Ok(system)
}

/// A distribution `Q` over linear scorers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizedClassifier<T> {
    members: Vec<LinearScorer<T>>,
    q: Vec<f64>,
}

impl<T: Scalar> RandomizedClassifier<T> {
    /// Mixture with weights `q`, renormalized to sum to one.
    pub fn new(members: Vec<LinearScorer<T>>, q: Vec<f64>) -> Result<Self> {
        if members.is_empty() || members.len() != q.len() {
            return Err(Error::Dimension(format!("{} members, {} weights", members.len(), q.len())));
        }
        if q.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("mixture weights must be non-negative"));
        }
        let total: f64 = q.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("mixture weights are all zero"));
        }
        Ok(Self {
            q: q.iter().map(|v| v / total).collect(),
            members,
        })
    }

    pub fn uniform(members: Vec<LinearScorer<T>>) -> Result<Self> {
        let q = vec![1.0; members.len()];
        Self::new(members, q)
    }

    pub fn members(&self) -> &[LinearScorer<T>] {
        &self.members
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }
}

/// Scorers with mixture weights; a single scorer is a one-member mixture.
pub trait Mixture<T: Scalar> {
    fn weighted_members(&self) -> Vec<(f64, &LinearScorer<T>)>;
}

impl<T: Scalar> Mixture<T> for LinearScorer<T> {
    fn weighted_members(&self) -> Vec<(f64, &LinearScorer<T>)> {
        vec![(1.0, self)]
    }
}

impl<T: Scalar> Mixture<T> for RandomizedClassifier<T> {
    fn weighted_members(&self) -> Vec<(f64, &LinearScorer<T>)> {
        self.q.iter().copied().zip(&self.members).collect()
    }
}

impl<T: Scalar> Classifier<T> for RandomizedClassifier<T> {
    fn prediction_mixture(&self, data: &LabeledDataset<T>) -> Result<Vec<(f64, Vec<usize>)>> {
        self.members
            .iter()
            .zip(&self.q)
            .map(|(s, &q)| Ok((q, s.predict_all(data)?)))
            .collect()
    }
}

/// Moments and error of one deterministic scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberStats {
    pub mu: Vec<f64>,
    pub err: f64,
}

/// Hard decisions of `scorer` on `data`: the plain prediction without a
/// schedule, the margin-shifted predictor `h_Δ` with one.
fn decisions<T: Scalar>(
    scorer: &LinearScorer<T>,
    data: &LabeledDataset<T>,
    schedule: Option<&MarginSchedule>,
) -> Result<Vec<usize>> {
    if scorer.n_classes() != 2 {
        return Err(Error::invalid("reductions need a two-class scorer"));
    }
    match schedule {
        None => scorer.predict_all(data),
        Some(s) => {
            s.covers(data)?;
            let scores = scorer.score_all(data)?;
            Ok(data
                .labels()
                .iter()
                .zip(data.attributes())
                .zip(scores.chunks(2))
                .map(|((&y, &a), f)| {
                    let f0 = f[0].to_f64_lossy() - if y == 0 { s.delta[0][a] } else { 0.0 };
                    let f1 = f[1].to_f64_lossy() - if y == 1 { s.delta[1][a] } else { 0.0 };
                    usize::from(f1 > f0)
                })
                .collect())
        }
    }
}

pub fn member_stats<T: Scalar>(
    scorer: &LinearScorer<T>,
    data: &LabeledDataset<T>,
    system: &ConstraintSystem,
    schedule: Option<&MarginSchedule>,
) -> Result<MemberStats> {
    let sizes = system.event_sizes(data)?;
    let h = decisions(scorer, data, schedule)?;
    let mut hits = vec![0usize; system.n_events()];
    let mut wrong = 0usize;
    for ((&y, &a), &p) in data.labels().iter().zip(data.attributes()).zip(&h) {
        wrong += usize::from(p != y);
        if p == 1 {
            for (hc, e) in hits.iter_mut().zip(&system.events) {
                if e.contains(y, a) {
                    *hc += 1;
                }
            }
        }
    }
    Ok(MemberStats {
        mu: hits.iter().zip(&sizes).map(|(&h, &n)| h as f64 / n as f64).collect(),
        err: wrong as f64 / data.len() as f64,
    })
}

fn mixture_stats<T: Scalar, C: Mixture<T> + ?Sized>(
    classifier: &C,
    data: &LabeledDataset<T>,
    system: &ConstraintSystem,
    schedule: Option<&MarginSchedule>,
) -> Result<MemberStats> {
    let mut out = MemberStats {
        mu: vec![0.0; system.n_events()],
        err: 0.0,
    };
    for (q, scorer) in classifier.weighted_members() {
        let s = member_stats(scorer, data, system, schedule)?;
        for (o, v) in out.mu.iter_mut().zip(&s.mu) {
            *o += q * v;
        }
        out.err += q * s.err;
    }
    Ok(out)
}

/// `μ̂_j` for every event, `Q`-averaged.
pub fn moments<T: Scalar, C: Mixture<T> + ?Sized>(
    classifier: &C,
    data: &LabeledDataset<T>,
    system: &ConstraintSystem,
    schedule: Option<&MarginSchedule>,
) -> Result<Vec<f64>> {
    Ok(mixture_stats(classifier, data, system, schedule)?.mu)
}

/// Empirical error of the (margin-shifted) predictor, `Q`-averaged.
pub fn error_rate<T: Scalar, C: Mixture<T> + ?Sized>(
    classifier: &C,
    data: &LabeledDataset<T>,
    system: &ConstraintSystem,
    schedule: Option<&MarginSchedule>,
) -> Result<f64> {
    Ok(mixture_stats(classifier, data, system, schedule)?.err)
}

fn lagrangian_of(stats: &MemberStats, lambda: &[f64], system: &ConstraintSystem) -> f64 {
    let r = system.residual(&stats.mu);
    stats.err + lambda.iter().zip(&r).map(|(l, v)| l * v).sum::<f64>()
}

fn check_lambda(lambda: &[f64], system: &ConstraintSystem) -> Result<()> {
    if lambda.len() != system.n_rows() {
        return Err(Error::Dimension(format!(
            "{} multipliers for {} constraint rows",
            lambda.len(),
            system.n_rows()
        )));
    }
    if lambda.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::invalid("multipliers must be finite and non-negative"));
    }
    Ok(())
}

/// `err(Q) + λᵀ (M μ̂(Q) − ĉ)`.
pub fn lagrangian<T: Scalar, C: Mixture<T> + ?Sized>(
    classifier: &C,
    lambda: &[f64],
    data: &LabeledDataset<T>,
    system: &ConstraintSystem,
    schedule: Option<&MarginSchedule>,
) -> Result<f64> {
    check_lambda(lambda, system)?;
    Ok(lagrangian_of(&mixture_stats(classifier, data, system, schedule)?, lambda, system))
}

/// Labels and weights of the cost-sensitive problem equivalent to
/// minimizing the Lagrangian at `λ` over deterministic classifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSensitive {
    pub labels: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Per-row costs `C0 = [y=1]/n` of predicting 0 and
/// `C1 = [y=0]/n + Σ_{j∋row} (Mᵀλ)_j / n_j` of predicting 1. The row gets the
/// cheaper label and weight `|C0 − C1|`.
pub fn reduction_labels<T: Scalar>(
    lambda: &[f64],
    data: &LabeledDataset<T>,
    system: &ConstraintSystem,
) -> Result<CostSensitive> {
    check_lambda(lambda, system)?;
    let sizes = system.event_sizes(data)?;
    let coef: Vec<f64> = system
        .transpose_apply(lambda)
        .iter()
        .zip(&sizes)
        .map(|(v, &n)| v / n as f64)
        .collect();
    let n = data.len() as f64;
    let mut labels = Vec::with_capacity(data.len());
    let mut weights = Vec::with_capacity(data.len());
    for (&y, &a) in data.labels().iter().zip(data.attributes()) {
        let c0 = if y == 1 { 1.0 / n } else { 0.0 };
        let mut c1 = if y == 0 { 1.0 / n } else { 0.0 };
        for (e, &v) in system.events.iter().zip(&coef) {
            if e.contains(y, a) {
                c1 += v;
            }
        }
        let s = c0 - c1;
        labels.push(usize::from(s > 0.0));
        weights.push(s.abs());
    }
    Ok(CostSensitive { labels, weights })
}

/// Settings shared by both reduction trainers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponseConfig {
    pub loss: LossKind,
    pub train: TrainConfig,
}

/// Train a scorer on the cost-sensitive problem at `λ`. Margins are looked up
/// with the reduction label and the sample's true attribute.
pub fn best_response<T: Scalar>(
    lambda: &[f64],
    data: &LabeledDataset<T>,
    system: &ConstraintSystem,
    schedule: &MarginSchedule,
    config: &BestResponseConfig,
    warm_start: Option<&LinearScorer<T>>,
) -> Result<LinearScorer<T>> {
    let matrix = TrainingMatrix::new(data, config.train.normalized);
    best_response_on(&matrix, lambda, data, system, schedule, config, warm_start)
}

fn best_response_on<T: Scalar>(
    matrix: &TrainingMatrix<T>,
    lambda: &[f64],
    data: &LabeledDataset<T>,
    system: &ConstraintSystem,
    schedule: &MarginSchedule,
    config: &BestResponseConfig,
    warm_start: Option<&LinearScorer<T>>,
) -> Result<LinearScorer<T>> {
    let cs = reduction_labels(lambda, data, system)?;
    if cs.weights.iter().all(|&w| w == 0.0) {
        // every row is indifferent; any scorer is a best response
        return Ok(warm_start
            .cloned()
            .unwrap_or_else(|| LinearScorer::zeros(2, data.n_features(), config.train.bias, false)));
    }
    Ok(train_on(
        matrix,
        data,
        Some(&cs.labels),
        &cs.weights,
        config.loss,
        schedule,
        &config.train,
        warm_start,
    )?
    .scorer)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpGradConfig {
    /// Bound on `‖λ‖₁`.
    pub b: f64,
    /// Target saddle-point gap.
    pub nu: f64,
    /// Step size; `ν / (2ρ²B)` with the running `ρ` when unset.
    pub eta: Option<f64>,
    /// Hard iteration limit on top of the theoretical cap.
    pub max_iters: Option<usize>,
    pub best_response: BestResponseConfig,
    /// Start each best response from the previous iterate.
    pub warm_start: bool,
    /// Epochs for warm-started best responses; the trainer's own count otherwise.
    pub warm_epochs: Option<usize>,
}

impl ExpGradConfig {
    pub fn new(b: f64, nu: f64, best_response: BestResponseConfig) -> Self {
        Self {
            b,
            nu,
            eta: None,
            max_iters: None,
            best_response,
            warm_start: true,
            warm_epochs: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::invalid("B must be positive"));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::invalid("nu must be positive"));
        }
        if self.eta.is_some_and(|e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::invalid("eta must be positive"));
        }
        if self.max_iters == Some(0) || self.warm_epochs == Some(0) {
            return Err(Error::invalid("max_iters and warm_epochs must be positive"));
        }
        Ok(())
    }
}

/// `⌈4ρ²B² ln(|K|+1) / ν²⌉`.
pub fn iteration_cap(rho: f64, b: f64, n_rows: usize, nu: f64) -> usize {
    let v = (4.0 * rho * rho * b * b * ((n_rows + 1) as f64).ln() / (nu * nu)).ceil();
    if v.is_finite() {
        (v as usize).max(1)
    } else {
        usize::MAX
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// `max_λ L(Q̂, λ) − min_h L(h, λ̂)`.
    pub gap: f64,
    pub upper: f64,
    pub lower: f64,
    pub iterations: usize,
    /// Largest `‖M μ̂(h) − ĉ‖_∞` over every evaluated scorer.
    pub rho: f64,
    /// Iteration cap implied by `rho`.
    pub cap: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub lambda: Vec<f64>,
    pub eta: f64,
    pub gap: f64,
    pub err_hat: f64,
    pub max_residual: f64,
}

#[derive(Debug, Clone)]
pub struct ExpGradOutcome<T> {
    pub classifier: RandomizedClassifier<T>,
    pub lambda_hat: Vec<f64>,
    pub certificate: Certificate,
    pub history: Vec<IterationLog>,
}

/// `B e^θ / (1 + Σ e^θ)`, the multiplier with an implicit slack coordinate.
fn softmax_lambda(theta: &[f64], b: f64) -> Vec<f64> {
    let top = theta.iter().copied().fold(0.0, f64::max);
    let e: Vec<f64> = theta.iter().map(|t| (t - top).exp()).collect();
    let denom = (-top).exp() + e.iter().sum::<f64>();
    e.iter().map(|v| b * v / denom).collect()
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Exponentiated-gradient saddle-point search.
///
/// Round `t` sets `λ_t` from the accumulated residuals, trains a best response
/// `h_t`, and measures the gap of the uniform mixture `Q̂` of `h_1..h_t`
/// against `λ̂ = mean(λ_1..λ_t)`. The upper value is closed-form over the
/// multiplier polytope. The lower value is the smallest Lagrangian at `λ̂`
/// among one fresh best response and the cached iterates. Stops when the gap
/// reaches `ν`, at the theoretical cap for the measured `ρ`, or at `max_iters`.
pub fn expgrad<T: Scalar>(
    data: &LabeledDataset<T>,
    system: &ConstraintSystem,
    schedule: &MarginSchedule,
    config: &ExpGradConfig,
) -> Result<ExpGradOutcome<T>> {
    config.validate()?;
    let k = system.n_rows();
    let sched = Some(schedule);
    let matrix = TrainingMatrix::new(data, config.best_response.train.normalized);
    let mut warm_config = config.best_response.clone();
    if let Some(e) = config.warm_epochs {
        warm_config.train.epochs = e;
    }
    let mut theta = vec![0.0; k];
    let mut lambda_sum = vec![0.0; k];
    let mut members: Vec<LinearScorer<T>> = Vec::new();
    let mut stats: Vec<MemberStats> = Vec::new();
    let mut history = Vec::new();
    let mut rho = 0.0f64;
    let mut iteration = 0usize;
    loop {
        iteration += 1;
        let lambda = softmax_lambda(&theta, config.b);
        let warm = if config.warm_start { members.last() } else { None };
        let br = if warm.is_some() { &warm_config } else { &config.best_response };
        let h = best_response_on(&matrix, &lambda, data, system, schedule, br, warm)?;
        let s = member_stats(&h, data, system, sched)?;
        let residual = system.residual(&s.mu);
        rho = rho.max(max_norm(&residual));
        members.push(h);
        stats.push(s);
        for (acc, l) in lambda_sum.iter_mut().zip(&lambda) {
            *acc += l;
        }

        let t = members.len() as f64;
        let lambda_hat: Vec<f64> = lambda_sum.iter().map(|v| v / t).collect();
        let mut q_hat = MemberStats {
            mu: vec![0.0; system.n_events()],
            err: 0.0,
        };
        for s in &stats {
            for (o, v) in q_hat.mu.iter_mut().zip(&s.mu) {
                *o += v / t;
            }
            q_hat.err += s.err / t;
        }
        let worst = system.residual(&q_hat.mu).into_iter().fold(f64::NEG_INFINITY, f64::max);
        let upper = q_hat.err + config.b * worst.max(0.0);

        let probe = best_response_on(&matrix, &lambda_hat, data, system, schedule, &warm_config, members.last())?;
        let probe_stats = member_stats(&probe, data, system, sched)?;
        rho = rho.max(max_norm(&system.residual(&probe_stats.mu)));
        let lower = stats
            .iter()
            .chain(std::iter::once(&probe_stats))
            .map(|s| lagrangian_of(s, &lambda_hat, system))
            .fold(f64::INFINITY, f64::min);
        let gap = upper - lower;

        let eta = config.eta.unwrap_or_else(|| {
            if rho > 0.0 {
                config.nu / (2.0 * rho * rho * config.b)
            } else {
                config.nu / (2.0 * config.b)
            }
        });
        history.push(IterationLog {
            iteration,
            lambda: lambda.clone(),
            eta,
            gap,
            err_hat: q_hat.err,
            max_residual: max_norm(&residual),
        });

        let cap = iteration_cap(rho, config.b, k, config.nu);
        let converged = gap <= config.nu;
        let limit = config.max_iters.map_or(cap, |m| m.min(cap));
        if converged || iteration >= limit {
            return Ok(ExpGradOutcome {
                classifier: RandomizedClassifier::uniform(members)?,
                lambda_hat,
                certificate: Certificate {
                    gap,
                    upper,
                    lower,
                    iterations: iteration,
                    rho,
                    cap,
                    converged,
                },
                history,
            });
        }
        for (th, r) in theta.iter_mut().zip(&residual) {
            *th += eta * r;
        }
    }
}

const LADDER: [f64; 9] = [0.0, 0.125, -0.125, 0.25, -0.25, 0.5, -0.5, 1.0, -1.0];

/// Multiplier grid for [`grid_search`].
///
/// Each `(+, −)` row pair takes a signed value from
/// `{0, ±B/8, ±B/4, ±B/2, ±B}`; a positive value loads the `+` row, a negative
/// one the `−` row. Points are the Cartesian product in mixed-radix order
/// (first pair fastest, zero first). When the product exceeds `budget`, the
/// points at indices `⌊i · total / budget⌋` are kept, so the all-zero vector is
/// always the first point.
pub fn lambda_grid(system: &ConstraintSystem, b: f64, budget: usize) -> Result<Vec<Vec<f64>>> {
    if budget == 0 {
        return Err(Error::invalid("grid budget must be positive"));
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::invalid("B must be positive"));
    }
    let pairs = system.n_rows() / 2;
    if pairs > 40 {
        return Err(Error::invalid("too many constraint pairs for a grid"));
    }
    let radix = LADDER.len() as u128;
    let total = radix.pow(pairs as u32);
    let picks: Vec<u128> = if total <= budget as u128 {
        (0..total).collect()
    } else {
        (0..budget as u128).map(|i| i * total / budget as u128).collect()
    };
    Ok(picks
        .into_iter()
        .map(|mut idx| {
            let mut lambda = vec![0.0; system.n_rows()];
            for p in 0..pairs {
                let v = LADDER[(idx % radix) as usize] * b;
                idx /= radix;
                if v > 0.0 {
                    lambda[2 * p] = v;
                } else if v < 0.0 {
                    lambda[2 * p + 1] = -v;
                }
            }
            lambda
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub lambda: Vec<f64>,
    /// Metrics of the trained scorer on the training data, true labels.
    pub train: FairnessReport,
}

#[derive(Debug, Clone)]
pub struct GridSearchOutcome<T> {
    pub scorer: LinearScorer<T>,
    pub selected: usize,
    /// Whether the selected point meets the fairness tolerance.
    pub feasible: bool,
    pub points: Vec<GridPoint>,
}

/// Index chosen by the grid-search rule: lowest combined loss among points
/// with violation at most `eps`, else the lowest violation. Ties keep the
/// earlier point.
pub fn select_point(points: &[GridPoint], eps: f64) -> Option<(usize, bool)> {
    let better = |a: f64, b: f64| a < b;
    let mut best: Option<usize> = None;
    for (i, p) in points.iter().enumerate() {
        if p.train.fairness_violation <= eps
            && best.is_none_or(|b| better(p.train.combined_loss, points[b].train.combined_loss))
        {
            best = Some(i);
        }
    }
    if let Some(b) = best {
        return Some((b, true));
    }
    let mut least: Option<usize> = None;
    for (i, p) in points.iter().enumerate() {
        if least.is_none_or(|b| better(p.train.fairness_violation, points[b].train.fairness_violation)) {
            least = Some(i);
        }
    }
    least.map(|i| (i, false))
}

/// One scorer per grid multiplier, trained on reduction labels with margins
/// from the true attribute, scored on the true labels, selected by
/// [`select_point`] against the system's `ε`.
pub fn grid_search<T: Scalar>(
    data: &LabeledDataset<T>,
    system: &ConstraintSystem,
    schedule: &MarginSchedule,
    grid: &[Vec<f64>],
    config: &BestResponseConfig,
) -> Result<GridSearchOutcome<T>> {
    if grid.is_empty() {
        return Err(Error::invalid("empty multiplier grid"));
    }
    let matrix = TrainingMatrix::new(data, config.train.normalized);
    let mut scorers = Vec::with_capacity(grid.len());
    let mut points = Vec::with_capacity(grid.len());
    for lambda in grid {
        let h = best_response_on(&matrix, lambda, data, system, schedule, config, None)?;
        let preds = h.predict_all(data)?;
        let train = Confusion::from_predictions(data, &preds)?.report(system.kind)?;
        points.push(GridPoint {
            lambda: lambda.clone(),
            train,
        });
        scorers.push(h);
    }
    let (selected, feasible) = select_point(&points, system.epsilon()).expect("grid is non-empty");
    Ok(GridSearchOutcome {
        scorer: scorers.swap_remove(selected),
        selected,
        feasible,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> LabeledDataset<f64> {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        LabeledDataset::from_rows(&rows, vec![0, 0, 0, 0, 1, 1, 1, 1], vec![0, 0, 1, 1, 0, 0, 1, 1], 2, 2)
            .unwrap()
    }

    #[test]
    fn eo_shape() {
        let s = build_constraints(ConstraintKind::Eo, &toy(), 0.0).unwrap();
        assert_eq!((s.n_events(), s.n_rows()), (6, 8));
        assert!(s.c_hat.iter().all(|&v| v == 0.0));
        for k in 0..s.n_rows() {
            let nz: Vec<f64> = (0..6).map(|j| s.coefficient(k, j)).filter(|&v| v != 0.0).collect();
            assert_eq!(nz.len(), 2);
            assert_eq!(nz.iter().sum::<f64>(), 0.0);
        }
        let s = build_constraints(ConstraintKind::Dp, &toy(), 0.1).unwrap();
        assert_eq!((s.n_events(), s.n_rows()), (3, 4));
        let s = build_constraints(ConstraintKind::EqOpt, &toy(), 0.1).unwrap();
        assert_eq!((s.n_events(), s.n_rows()), (3, 4));
    }

    #[test]
    fn empty_event_is_reported() {
        let rows = vec![vec![0.0]; 3];
        let ds = LabeledDataset::from_rows(&rows, vec![0, 1, 1], vec![0, 0, 1], 2, 2).unwrap();
        assert!(matches!(
            build_constraints(ConstraintKind::Eo, &ds, 0.0),
            Err(Error::EmptyEvent(e)) if e == "(1,0)"
        ));
        assert!(build_constraints(ConstraintKind::EqOpt, &ds, 0.0).is_ok());
    }

    #[test]
    fn zero_lambda_gives_true_labels() {
        let ds = toy();
        let s = build_constraints(ConstraintKind::Eo, &ds, 0.05).unwrap();
        let cs = reduction_labels(&[0.0; 8], &ds, &s).unwrap();
        assert_eq!(cs.labels, ds.labels());
        assert!(cs.weights.iter().all(|&w| w == 1.0 / 8.0));
    }

    #[test]
    fn heavy_multiplier_flips_labels() {
        let ds = toy();
        let s = build_constraints(ConstraintKind::Eo, &ds, 0.05).unwrap();
        // row 0: + (μ_(0,0) − μ_(*,0)); pushing it raises the cost of predicting 1 on (0,0)
        let mut lambda = vec![0.0; 8];
        lambda[0] = 100.0;
        let cs = reduction_labels(&lambda, &ds, &s).unwrap();
        assert_eq!(&cs.labels[..4], &[0, 0, 1, 1]);
    }

    #[test]
    fn grid_layout() {
        let s = build_constraints(ConstraintKind::Eo, &toy(), 0.05).unwrap();
        let all = lambda_grid(&s, 1.0, usize::MAX).unwrap();
        assert_eq!(all.len(), 9usize.pow(4));
        assert_eq!(all[0], vec![0.0; 8]);
        assert_eq!(all[1], vec![0.125, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(all[2], vec![0.0, 0.125, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let some = lambda_grid(&s, 1.0, 10).unwrap();
        assert_eq!(some.len(), 10);
        assert_eq!(some[0], vec![0.0; 8]);
        assert_eq!(some[1], all[656]);
    }

    #[test]
    fn softmax_lambda_is_bounded() {
        let l = softmax_lambda(&[1000.0, -5.0, 0.0], 2.0);
        assert!(l.iter().all(|v| v.is_finite() && *v >= 0.0));
        assert!(l.iter().sum::<f64>() <= 2.0 + 1e-12);
        assert_eq!(softmax_lambda(&[0.0, 0.0], 3.0), vec![1.0, 1.0]);
    }

    #[test]
    fn cap_formula() {
        assert_eq!(iteration_cap(1.0, 1.0, 8, 0.1), (400.0 * 9f64.ln()).ceil() as usize);
        assert_eq!(iteration_cap(0.0, 1.0, 8, 0.1), 1);
    }
}
