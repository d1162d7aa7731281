//! Multi-class linear scorer and its first-order trainer.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::losses::{shifted_loss, LossKind};
use crate::margins::MarginSchedule;
use crate::rng;
use crate::scalar::{dot, Scalar};

/// Anything that maps a feature vector to one score per class.
pub trait ScoreFunction<T: Scalar> {
    fn scores(&self, x: &[T]) -> Result<Vec<T>>;
}

impl<T: Scalar, F: Fn(&[T]) -> Vec<T>> ScoreFunction<T> for F {
    fn scores(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(self(x))
    }
}

/// Index of the largest score; ties go to the smallest index.
#[inline]
pub fn argmax<T: Scalar>(scores: &[T]) -> usize {
    let mut best = 0;
    for i in 1..scores.len() {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    best
}

fn unit_scale<T: Scalar>(x: &[T]) -> T {
    let norm = dot(x, x).sqrt();
    if norm > T::zero() {
        T::one() / norm
    } else {
        T::one()
    }
}

/// `f(x) = W x + b`, `W` of shape `k x d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearScorer<T> {
    n_classes: usize,
    n_features: usize,
    /// Row-major `k x d`.
    weights: Vec<T>,
    bias: Option<Vec<T>>,
    /// Unit-norm weight rows and unit-norm inputs.
    normalized: bool,
}

impl<T: Scalar> LinearScorer<T> {
    pub fn zeros(n_classes: usize, n_features: usize, bias: bool, normalized: bool) -> Self {
        Self {
            n_classes,
            n_features,
            weights: vec![T::zero(); n_classes * n_features],
            bias: bias.then(|| vec![T::zero(); n_classes]),
            normalized,
        }
    }

    /// Scorer from explicit parameters. With `normalized`, rows are rescaled to
    /// unit norm, and an all-zero row is rejected.
    pub fn from_parts(
        n_classes: usize,
        n_features: usize,
        weights: Vec<T>,
        bias: Option<Vec<T>>,
        normalized: bool,
    ) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::invalid("a scorer needs at least two classes"));
        }
        if weights.len() != n_classes * n_features {
            return Err(Error::Dimension(format!(
                "{} weights for a {n_classes}x{n_features} scorer",
                weights.len()
            )));
        }
        if bias.as_ref().is_some_and(|b| b.len() != n_classes) {
            return Err(Error::Dimension("bias length differs from class count".into()));
        }
        if weights.iter().chain(bias.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("scorer parameters must be finite"));
        }
        let mut s = Self {
            n_classes,
            n_features,
            weights,
            bias,
            normalized,
        };
        if normalized {
            for i in 0..n_classes {
                if dot(s.row(i), s.row(i)) == T::zero() {
                    return Err(Error::invalid(format!("weight row {i} is zero")));
                }
            }
            s.normalize_rows();
        }
        Ok(s)
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn bias(&self) -> Option<&[T]> {
        self.bias.as_deref()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn row(&self, class: usize) -> &[T] {
        &self.weights[class * self.n_features..(class + 1) * self.n_features]
    }

    fn normalize_rows(&mut self) {
        let d = self.n_features;
        for row in self.weights.chunks_mut(d) {
            let norm = dot(row, row).sqrt();
            if norm > T::zero() {
                row.iter_mut().for_each(|v| *v /= norm);
            }
        }
    }

    /// Scores into `out` without dimension checks beyond debug assertions.
    #[inline]
    pub fn score_into(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.n_features);
        debug_assert_eq!(out.len(), self.n_classes);
        let scale = if self.normalized { unit_scale(x) } else { T::one() };
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), x) * scale;
            if let Some(b) = &self.bias {
                *o += b[i];
            }
        }
    }

    pub fn score(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.n_features {
            return Err(Error::Dimension(format!(
                "input has {} features, scorer expects {}",
                x.len(),
                self.n_features
            )));
        }
        let mut out = vec![T::zero(); self.n_classes];
        self.score_into(x, &mut out);
        Ok(out)
    }

    pub fn predict(&self, x: &[T]) -> Result<usize> {
        Ok(argmax(&self.score(x)?))
    }

    /// Predictions for every row of `data`.
    pub fn predict_all(&self, data: &LabeledDataset<T>) -> Result<Vec<usize>> {
        self.check_data(data)?;
        let mut buf = vec![T::zero(); self.n_classes];
        Ok(data
            .rows()
            .map(|x| {
                self.score_into(x, &mut buf);
                argmax(&buf)
            })
            .collect())
    }

    /// Score matrix (row-major `n x k`) for every row of `data`.
    pub fn score_all(&self, data: &LabeledDataset<T>) -> Result<Vec<T>> {
        self.check_data(data)?;
        let mut out = vec![T::zero(); data.len() * self.n_classes];
        for (x, o) in data.rows().zip(out.chunks_mut(self.n_classes)) {
            self.score_into(x, o);
        }
        Ok(out)
    }

    fn check_data(&self, data: &LabeledDataset<T>) -> Result<()> {
        if data.n_features() != self.n_features {
            return Err(Error::Dimension(format!(
                "data has {} features, scorer expects {}",
                data.n_features(),
                self.n_features
            )));
        }
        Ok(())
    }

    /// `‖W‖²` (bias excluded).
    pub fn weight_norm_sq(&self) -> T {
        dot(&self.weights, &self.weights)
    }
}

impl<T: Scalar> ScoreFunction<T> for LinearScorer<T> {
    fn scores(&self, x: &[T]) -> Result<Vec<T>> {
        self.score(x)
    }
}

#[derive(Serialize, Deserialize)]
struct ScorerFile<T> {
    shape: [usize; 2],
    normalized: bool,
    weights: Vec<T>,
    bias: Option<Vec<T>>,
}

impl<T: Scalar + Serialize + DeserializeOwned> LinearScorer<T> {
    /// Write as JSON: a `[k, d]` shape header plus flat row-major weights.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = ScorerFile {
            shape: [self.n_classes, self.n_features],
            normalized: self.normalized,
            weights: self.weights.clone(),
            bias: self.bias.clone(),
        };
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_vec(&file)?).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let f: ScorerFile<T> = serde_json::from_slice(&bytes)?;
        let [k, d] = f.shape;
        if f.weights.len() != k * d {
            return Err(Error::Dimension(format!("shape {k}x{d} but {} weights", f.weights.len())));
        }
        // stored rows are already unit norm; skip the rescale so a round trip is exact
        let s = Self::from_parts(k, d, f.weights, f.bias, false)?;
        Ok(Self {
            normalized: f.normalized,
            ..s
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    PlainGd,
    /// Adam with moment decay 0.9 / 0.999 and epsilon 1e-8.
    AdaptiveMoments,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Rows per optimizer step: the whole training set, or fixed-size shuffled batches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchSize {
    Full,
    Rows(usize),
}

impl Serialize for BatchSize {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BatchSize::Full => s.serialize_str("full"),
            BatchSize::Rows(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for BatchSize {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Rows(usize),
            Name(String),
        }
        match Repr::deserialize(d)? {
            Repr::Rows(0) => Err(serde::de::Error::custom("batch size must be positive")),
            Repr::Rows(n) => Ok(BatchSize::Rows(n)),
            Repr::Name(s) if s == "full" => Ok(BatchSize::Full),
            Repr::Name(s) => Err(serde::de::Error::custom(format!("unknown batch size `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub step_size: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: BatchSize,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub bias: bool,
    pub normalized: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            step_size: 1e-4,
            weight_decay: 5e-5,
            epochs: 10_000,
            batch_size: BatchSize::Full,
            seed: 0,
            optimizer: Optimizer::AdaptiveMoments,
            bias: true,
            normalized: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::invalid("step size must be positive"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid("weight decay must be non-negative"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be positive"));
        }
        if self.batch_size == BatchSize::Rows(0) {
            return Err(Error::invalid("batch size must be positive"));
        }
        Ok(())
    }
}

/// Trained scorer plus the objective value at the start of every epoch.
#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub scorer: LinearScorer<T>,
    pub objective: Vec<f64>,
}

/// Design matrix stored as a per-column baseline plus sparse deviations from it.
///
/// One-hot blocks are mostly a single repeated value, so keeping only the
/// entries that differ from each column's most frequent value makes both
/// `W x` and `Σ g xᵀ` proportional to the number of deviations.
struct Design<T> {
    d: usize,
    base: Vec<T>,
    ptr: Vec<usize>,
    col: Vec<u32>,
    val: Vec<T>,
}

impl<T: Scalar> Design<T> {
    fn new(rows: &[T], n: usize, d: usize) -> Self {
        let mut base = vec![T::zero(); d];
        let mut tally: HashMap<u64, usize> = HashMap::new();
        for (c, b) in base.iter_mut().enumerate() {
            tally.clear();
            for j in 0..n {
                *tally.entry(rows[j * d + c].to_f64_lossy().to_bits()).or_default() += 1;
            }
            let mode = tally
                .iter()
                .max_by(|(va, ca), (vb, cb)| {
                    ca.cmp(cb)
                        .then_with(|| f64::from_bits(**vb).total_cmp(&f64::from_bits(**va)))
                })
                .map(|(v, _)| f64::from_bits(*v))
                .unwrap_or(0.0);
            *b = (0..n)
                .map(|j| rows[j * d + c])
                .find(|v| v.to_f64_lossy() == mode)
                .unwrap_or_else(T::zero);
        }
        let mut ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::new();
        let mut val = Vec::new();
        ptr.push(0);
        for j in 0..n {
            for c in 0..d {
                let r = rows[j * d + c] - base[c];
                if r != T::zero() {
                    col.push(c as u32);
                    val.push(r);
                }
            }
            ptr.push(col.len());
        }
        Self { d, base, ptr, col, val }
    }

    /// `out = offset + W r_j`, where `offset = W base + b` is precomputed.
    #[inline]
    fn scores(&self, j: usize, w: &[T], offset: &[T], out: &mut [T]) {
        out.copy_from_slice(offset);
        for p in self.ptr[j]..self.ptr[j + 1] {
            let c = self.col[p] as usize;
            let v = self.val[p];
            for (i, o) in out.iter_mut().enumerate() {
                *o += w[i * self.d + c] * v;
            }
        }
    }

    /// `gw += coef ⊗ r_j`.
    #[inline]
    fn accumulate(&self, j: usize, coef: &[T], gw: &mut [T]) {
        for p in self.ptr[j]..self.ptr[j + 1] {
            let c = self.col[p] as usize;
            let v = self.val[p];
            for (i, &g) in coef.iter().enumerate() {
                gw[i * self.d + c] += g * v;
            }
        }
    }
}

struct Moments<T> {
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Scalar> Moments<T> {
    fn new(len: usize) -> Self {
        Self {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
        }
    }
}

fn step<T: Scalar>(
    opt: Optimizer,
    lr: T,
    t: i32,
    params: &mut [T],
    grad: &[T],
    state: &mut Moments<T>,
) {
    match opt {
        Optimizer::PlainGd => {
            for (p, &g) in params.iter_mut().zip(grad) {
                *p -= lr * g;
            }
        }
        Optimizer::AdaptiveMoments => {
            let (b1, b2, eps) = (T::lit(BETA1), T::lit(BETA2), T::lit(ADAM_EPS));
            let c1 = T::one() - b1.powi(t);
            let c2 = T::one() - b2.powi(t);
            for i in 0..params.len() {
                let g = grad[i];
                state.m[i] = b1 * state.m[i] + (T::one() - b1) * g;
                state.v[i] = b2 * state.v[i] + (T::one() - b2) * g * g;
                let mh = state.m[i] / c1;
                let vh = state.v[i] / c2;
                params[i] -= lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}

/// Train a scorer on the weighted margin-shifted loss; see [`train_from`].
pub fn train<T: Scalar>(
    data: &LabeledDataset<T>,
    labels_override: Option<&[usize]>,
    sample_weights: &[f64],
    loss: LossKind,
    schedule: &MarginSchedule,
    config: &TrainConfig,
) -> Result<LinearScorer<T>> {
    Ok(train_from(data, labels_override, sample_weights, loss, schedule, config, None)?.scorer)
}

/// Minimize `(1/Σw) Σ_j w_j ℓ(f(x_j) − Δ_{ỹ_j,a_j} e_{ỹ_j}, ỹ_j) + λ_wd ‖W‖²`.
///
/// `ỹ` is `labels_override` when given and the dataset labels otherwise; the
/// margin is always looked up with the sample's true attribute. Training
/// starts from `init` when given (warm start), else from weights drawn
/// uniformly in `[-0.01, 0.01]` with the `init` stream of `config.seed` and a
/// zero bias.
pub fn train_from<T: Scalar>(
    data: &LabeledDataset<T>,
    labels_override: Option<&[usize]>,
    sample_weights: &[f64],
    loss: LossKind,
    schedule: &MarginSchedule,
    config: &TrainConfig,
    init: Option<&LinearScorer<T>>,
) -> Result<TrainOutcome<T>> {
    let matrix = TrainingMatrix::new(data, config.normalized);
    train_on(&matrix, data, labels_override, sample_weights, loss, schedule, config, init)
}

/// Preprocessed features of one dataset, reusable across many training calls
/// on that dataset (reductions train hundreds of scorers on the same rows).
pub struct TrainingMatrix<T> {
    design: Design<T>,
    n: usize,
    normalized: bool,
}

impl<T: Scalar> TrainingMatrix<T> {
    pub fn new(data: &LabeledDataset<T>, normalized: bool) -> Self {
        let (n, d) = (data.len(), data.n_features());
        let design = if normalized {
            let rows: Vec<T> = data
                .rows()
                .flat_map(|x| {
                    let s = unit_scale(x);
                    x.iter().map(move |&v| v * s)
                })
                .collect();
            Design::new(&rows, n, d)
        } else {
            Design::new(data.features(), n, d)
        };
        Self { design, n, normalized }
    }
}

/// [`train_from`] on a prebuilt [`TrainingMatrix`] of `data`.
#[allow(clippy::too_many_arguments)]
pub fn train_on<T: Scalar>(
    matrix: &TrainingMatrix<T>,
    data: &LabeledDataset<T>,
    labels_override: Option<&[usize]>,
    sample_weights: &[f64],
    loss: LossKind,
    schedule: &MarginSchedule,
    config: &TrainConfig,
    init: Option<&LinearScorer<T>>,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    if matrix.n != data.len() || matrix.design.d != data.n_features() || matrix.normalized != config.normalized {
        return Err(Error::Dimension("training matrix was built for different data or normalization".into()));
    }
    if loss == LossKind::ZeroOne {
        return Err(Error::invalid("cannot train on the zero-one loss"));
    }
    let n = data.len();
    let d = data.n_features();
    let k = data.n_classes();
    if n == 0 {
        return Err(Error::invalid("empty training set"));
    }
    if sample_weights.len() != n {
        return Err(Error::Dimension(format!("{} sample weights for {n} rows", sample_weights.len())));
    }
    if sample_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid("sample weights must be finite and non-negative"));
    }
    let labels = labels_override.unwrap_or(data.labels());
    if labels.len() != n {
        return Err(Error::Dimension(format!("{} override labels for {n} rows", labels.len())));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::invalid(format!("override label {y} out of range")));
    }
    schedule.covers(data)?;
    let total: f64 = sample_weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("sample weights are all zero"));
    }
    let weight: Vec<T> = sample_weights.iter().map(|&w| T::lit(w / total)).collect();
    let shift: Vec<T> = labels
        .iter()
        .zip(data.attributes())
        .map(|(&y, &a)| T::lit(schedule.delta[y][a]))
        .collect();

    let mut scorer = match init {
        Some(s) => {
            if s.n_classes != k || s.n_features != d {
                return Err(Error::Dimension("warm-start scorer has the wrong shape".into()));
            }
            let mut s = s.clone();
            s.normalized = config.normalized;
            match (&s.bias, config.bias) {
                (None, true) => s.bias = Some(vec![T::zero(); k]),
                (Some(_), false) => s.bias = None,
                _ => {}
            }
            s
        }
        None => {
            let mut r = rng::stream(config.seed, "init", 0);
            let mut s = LinearScorer::zeros(k, d, config.bias, config.normalized);
            s.weights.iter_mut().for_each(|w| *w = T::lit(r.gen_range(-0.01..=0.01)));
            s
        }
    };
    if config.normalized {
        scorer.normalize_rows();
    }

    let design = &matrix.design;

    let lr = T::lit(config.step_size);
    let wd = T::lit(config.weight_decay);
    let two = T::lit(2.0);
    let mut order: Vec<usize> = (0..n).collect();
    let batch = match config.batch_size {
        BatchSize::Full => n,
        BatchSize::Rows(b) => b.min(n),
    };
    let mut w_state = Moments::new(k * d);
    let mut b_state = Moments::new(k);
    let mut gw = vec![T::zero(); k * d];
    let mut gb = vec![T::zero(); k];
    let mut offset = vec![T::zero(); k];
    let mut s = vec![T::zero(); k];
    let mut g = vec![T::zero(); k];
    let mut objective = Vec::with_capacity(config.epochs);
    let mut t = 0i32;

    for epoch in 0..config.epochs {
        if batch < n {
            order.shuffle(&mut rng::stream(config.seed, "shuffle", epoch as u64));
        }
        let mut epoch_loss = T::zero();
        for chunk in order.chunks(batch) {
            let scale = if batch < n {
                let sub: T = chunk.iter().map(|&j| weight[j]).sum();
                if sub > T::zero() {
                    T::one() / sub
                } else {
                    continue;
                }
            } else {
                T::one()
            };
            for (i, o) in offset.iter_mut().enumerate() {
                *o = dot(scorer.row(i), &design.base);
                if let Some(b) = &scorer.bias {
                    *o += b[i];
                }
            }
            gw.iter_mut().for_each(|v| *v = T::zero());
            gb.iter_mut().for_each(|v| *v = T::zero());
            for &j in chunk {
                let wj = weight[j];
                if wj == T::zero() {
                    continue;
                }
                design.scores(j, &scorer.weights, &offset, &mut s);
                let l = shifted_loss(loss, &s, labels[j], shift[j], Some(&mut g));
                epoch_loss += wj * l;
                let ws = wj * scale;
                for (gi, gbi) in g.iter_mut().zip(gb.iter_mut()) {
                    *gi *= ws;
                    *gbi += *gi;
                }
                design.accumulate(j, &g, &mut gw);
            }
            for i in 0..k {
                let row = &mut gw[i * d..(i + 1) * d];
                for c in 0..d {
                    row[c] += gb[i] * design.base[c] + two * wd * scorer.weights[i * d + c];
                }
            }
            let reg = wd * scorer.weight_norm_sq();
            if batch == n {
                epoch_loss += reg;
            }
            t = t.saturating_add(1);
            step(config.optimizer, lr, t, &mut scorer.weights, &gw, &mut w_state);
            if let Some(b) = scorer.bias.as_mut() {
                step(config.optimizer, lr, t, b, &gb, &mut b_state);
            }
            if config.normalized {
                scorer.normalize_rows();
            }
        }
        if batch < n {
            epoch_loss += wd * scorer.weight_norm_sq();
        }
        let obj = epoch_loss.to_f64_lossy();
        if !obj.is_finite() || scorer.weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { epoch });
        }
        objective.push(obj);
    }
    Ok(TrainOutcome { scorer, objective })
}

/// Objective of [`train_from`] evaluated at `scorer`.
pub fn objective<T: Scalar>(
    scorer: &LinearScorer<T>,
    data: &LabeledDataset<T>,
    labels_override: Option<&[usize]>,
    sample_weights: &[f64],
    loss: LossKind,
    schedule: &MarginSchedule,
    weight_decay: f64,
) -> Result<f64> {
    let labels = labels_override.unwrap_or(data.labels());
    let total: f64 = sample_weights.iter().sum();
    let scores = scorer.score_all(data)?;
    let k = scorer.n_classes();
    let mut acc = 0.0;
    for j in 0..data.len() {
        let y = labels[j];
        let shift = T::lit(schedule.margin(y, data.attributes()[j])?);
        let l = shifted_loss(loss, &scores[j * k..(j + 1) * k], y, shift, None);
        acc += sample_weights[j] / total * l.to_f64_lossy();
    }
    Ok(acc + weight_decay * scorer.weight_norm_sq().to_f64_lossy())
}
