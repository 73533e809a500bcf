//! Baseline probabilistic scorer.
//!
//! The default model is an L2-regularised logistic regression trained by
//! full-batch gradient descent on standardised features. A one-hidden-layer
//! ReLU network trained with mini-batch Adam is available for runs that want
//! to mirror a small neural baseline.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureColumn, Group, InstanceId, Split, SplitRole};
use crate::error::{Error, Result};
use crate::scores::ScoreSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Logistic,
    OneHiddenLayer,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Logistic => "logistic",
            ModelKind::OneHiddenLayer => "one-hidden-layer",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScorerConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2_penalty: f64,
    pub seed: u64,
    pub model_kind: ModelKind,
    /// Hidden width; ignored by the logistic model.
    pub hidden_units: usize,
    /// Mini-batch size; the logistic model always uses the full batch.
    pub batch_size: usize,
    /// Feed the sensitive attribute to the model as a 0/1 feature.
    pub include_sensitive: bool,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig {
            learning_rate: 0.1,
            epochs: 500,
            l2_penalty: 1e-4,
            seed: 42,
            model_kind: ModelKind::Logistic,
            hidden_units: 200,
            batch_size: 128,
            include_sensitive: false,
        }
    }
}

impl ScorerConfig {
    /// 1x200 ReLU network, 50 epochs of Adam with batches of 128.
    pub fn small_network() -> Self {
        ScorerConfig {
            learning_rate: 1e-3,
            epochs: 50,
            l2_penalty: 0.0,
            model_kind: ModelKind::OneHiddenLayer,
            ..ScorerConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter("learning_rate must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be positive".into()));
        }
        if !(self.l2_penalty >= 0.0 && self.l2_penalty.is_finite()) {
            return Err(Error::InvalidParameter("l2_penalty must be nonnegative".into()));
        }
        if self.model_kind == ModelKind::OneHiddenLayer && (self.hidden_units == 0 || self.batch_size == 0) {
            return Err(Error::InvalidParameter(
                "hidden_units and batch_size must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Slot {
    Numeric { column: String },
    /// One indicator per level except the first.
    Categorical { column: String, levels: usize },
}

/// Maps dataset rows to standardised design vectors.
#[derive(Debug, Clone, PartialEq)]
struct Encoder {
    slots: Vec<Slot>,
    include_sensitive: bool,
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Encoder {
    fn layout(d: &Dataset) -> Vec<Slot> {
        d.columns()
            .iter()
            .map(|c| match c {
                FeatureColumn::Numeric { name, .. } => Slot::Numeric {
                    column: name.clone(),
                },
                FeatureColumn::Categorical { name, levels, .. } => Slot::Categorical {
                    column: name.clone(),
                    levels: levels.len(),
                },
            })
            .collect()
    }

    fn width(&self) -> usize {
        self.slots
            .iter()
            .map(|s| match s {
                Slot::Numeric { .. } => 1,
                Slot::Categorical { levels, .. } => levels.saturating_sub(1),
            })
            .sum::<usize>()
            + usize::from(self.include_sensitive)
    }

    fn raw_row(&self, d: &Dataset, id: InstanceId, out: &mut Vec<f64>) -> Result<()> {
        out.clear();
        for slot in &self.slots {
            match slot {
                Slot::Numeric { column } => match d.column(column) {
                    Some(FeatureColumn::Numeric { values, .. }) => out.push(values[id]),
                    _ => return Err(Error::ModelFormat(format!("dataset lacks numeric `{column}`"))),
                },
                Slot::Categorical { column, levels } => match d.column(column) {
                    Some(FeatureColumn::Categorical { codes, levels: l, .. }) if l.len() == *levels => {
                        let code = codes[id] as usize;
                        out.extend((1..*levels).map(|k| if k == code { 1.0 } else { 0.0 }));
                    }
                    _ => {
                        return Err(Error::ModelFormat(format!(
                            "dataset lacks categorical `{column}` with {levels} levels"
                        )))
                    }
                },
            }
        }
        if self.include_sensitive {
            out.push(if d.group(id)? == Group::Protected { 1.0 } else { 0.0 });
        }
        Ok(())
    }

    fn row(&self, d: &Dataset, id: InstanceId, out: &mut Vec<f64>) -> Result<()> {
        self.raw_row(d, id, out)?;
        for ((v, m), s) in out.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Params {
    Logistic {
        weights: Vec<f64>,
        bias: f64,
    },
    /// `w1` is hidden x input, row major.
    Network {
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: f64,
    },
}

/// A fitted, immutable scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct Scorer {
    encoder: Encoder,
    params: Params,
    loss_history: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of logit `z` against label `y`.
fn bce(z: f64, y: f64) -> f64 {
    z.max(0.0) - y * z + (-z.abs()).exp().ln_1p()
}

pub fn fit(d: &Dataset, split: &Split, cfg: &ScorerConfig) -> Result<Scorer> {
    cfg.validate()?;
    let train = &split.train_ids;
    if train.is_empty() {
        return Err(Error::EmptyTrain);
    }
    let mut encoder = Encoder {
        slots: Encoder::layout(d),
        include_sensitive: cfg.include_sensitive,
        mean: Vec::new(),
        std: Vec::new(),
    };
    let p = encoder.width();

    let mut x = Vec::with_capacity(train.len() * p);
    let mut y = Vec::with_capacity(train.len());
    let mut buf = Vec::with_capacity(p);
    for &id in train {
        encoder.raw_row(d, id, &mut buf)?;
        x.extend_from_slice(&buf);
        y.push(f64::from(d.label(id)?));
    }
    let n = train.len();
    let mut mean = vec![0.0; p];
    let mut std = vec![0.0; p];
    for row in x.chunks_exact(p) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    for row in x.chunks_exact(p) {
        for ((s, v), m) in std.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    for s in std.iter_mut() {
        *s = (*s / n as f64).sqrt();
        if !(*s > 1e-12) {
            *s = 1.0;
        }
    }
    for row in x.chunks_exact_mut(p) {
        for ((v, m), s) in row.iter_mut().zip(&mean).zip(&std) {
            *v = (*v - m) / s;
        }
    }
    encoder.mean = mean;
    encoder.std = std;

    let (params, loss_history) = match cfg.model_kind {
        ModelKind::Logistic => fit_logistic(&x, &y, p, cfg)?,
        ModelKind::OneHiddenLayer => fit_network(&x, &y, p, cfg)?,
    };
    Ok(Scorer {
        encoder,
        params,
        loss_history,
    })
}

fn fit_logistic(x: &[f64], y: &[f64], p: usize, cfg: &ScorerConfig) -> Result<(Params, Vec<f64>)> {
    let n = y.len() as f64;
    let mut w = vec![0.0; p];
    let mut b = 0.0;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut grad = vec![0.0; p];
    for epoch in 0..cfg.epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        let mut loss = 0.0;
        for (row, &yi) in x.chunks_exact(p).zip(y) {
            let z = b + row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            loss += bce(z, yi);
            let r = sigmoid(z) - yi;
            grad_b += r;
            for (g, v) in grad.iter_mut().zip(row) {
                *g += r * v;
            }
        }
        let penalty = 0.5 * cfg.l2_penalty * w.iter().map(|v| v * v).sum::<f64>();
        let loss = loss / n + penalty;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        history.push(loss);
        for (wi, g) in w.iter_mut().zip(&grad) {
            *wi -= cfg.learning_rate * (g / n + cfg.l2_penalty * *wi);
        }
        b -= cfg.learning_rate * grad_b / n;
    }
    Ok((Params::Logistic { weights: w, bias: b }, history))
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(len: usize) -> Self {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = B1 * *m + (1.0 - B1) * g;
            *v = B2 * *v + (1.0 - B2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + 1e-8);
        }
    }
}

fn fit_network(x: &[f64], y: &[f64], p: usize, cfg: &ScorerConfig) -> Result<(Params, Vec<f64>)> {
    let h = cfg.hidden_units;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init1 = Normal::new(0.0, (2.0 / p.max(1) as f64).sqrt()).expect("valid std");
    let init2 = Normal::new(0.0, (1.0 / h as f64).sqrt()).expect("valid std");

    // Flat parameter vector: w1 (h*p), b1 (h), w2 (h), b2 (1).
    let mut theta = vec![0.0; h * p + 2 * h + 1];
    for v in theta[..h * p].iter_mut() {
        *v = init1.sample(&mut rng);
    }
    for v in theta[h * p + h..h * p + 2 * h].iter_mut() {
        *v = init2.sample(&mut rng);
    }
    let mut adam = Adam::new(theta.len());
    let mut grads = vec![0.0; theta.len()];
    let mut hidden = vec![0.0; h];
    let mut order: Vec<usize> = (0..y.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            let (w1, rest) = theta.split_at(h * p);
            let (b1, rest) = rest.split_at(h);
            let (w2, b2) = rest.split_at(h);
            for &i in batch {
                let row = &x[i * p..(i + 1) * p];
                for k in 0..h {
                    let pre = b1[k] + w1[k * p..(k + 1) * p].iter().zip(row).map(|(a, c)| a * c).sum::<f64>();
                    hidden[k] = pre.max(0.0);
                }
                let z = b2[0] + hidden.iter().zip(w2).map(|(a, c)| a * c).sum::<f64>();
                epoch_loss += bce(z, y[i]);
                let r = sigmoid(z) - y[i];
                let (gw1, grest) = grads.split_at_mut(h * p);
                let (gb1, grest) = grest.split_at_mut(h);
                let (gw2, gb2) = grest.split_at_mut(h);
                gb2[0] += r;
                for k in 0..h {
                    gw2[k] += r * hidden[k];
                    if hidden[k] > 0.0 {
                        let back = r * w2[k];
                        gb1[k] += back;
                        for (g, v) in gw1[k * p..(k + 1) * p].iter_mut().zip(row) {
                            *g += back * v;
                        }
                    }
                }
            }
            let scale = 1.0 / batch.len() as f64;
            for (g, t) in grads.iter_mut().zip(&theta) {
                *g = *g * scale + cfg.l2_penalty * t;
            }
            adam.step(&mut theta, &grads, cfg.learning_rate);
        }
        let loss = epoch_loss / y.len() as f64;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        history.push(loss);
    }
    let b2 = theta[h * p + 2 * h];
    let w2 = theta[h * p + h..h * p + 2 * h].to_vec();
    let b1 = theta[h * p..h * p + h].to_vec();
    theta.truncate(h * p);
    Ok((Params::Network { w1: theta, b1, w2, b2 }, history))
}

impl Scorer {
    pub fn kind(&self) -> ModelKind {
        match self.params {
            Params::Logistic { .. } => ModelKind::Logistic,
            Params::Network { .. } => ModelKind::OneHiddenLayer,
        }
    }

    /// Mean training loss per epoch (empty for a loaded model).
    pub fn loss_history(&self) -> &[f64] {
        &self.loss_history
    }

    /// A logistic model with all coefficients zero; scores every row 0.5.
    pub fn zero_logistic(d: &Dataset, include_sensitive: bool) -> Scorer {
        let mut encoder = Encoder {
            slots: Encoder::layout(d),
            include_sensitive,
            mean: Vec::new(),
            std: Vec::new(),
        };
        let p = encoder.width();
        encoder.mean = vec![0.0; p];
        encoder.std = vec![1.0; p];
        Scorer {
            encoder,
            params: Params::Logistic {
                weights: vec![0.0; p],
                bias: 0.0,
            },
            loss_history: Vec::new(),
        }
    }

    fn logit(&self, row: &[f64]) -> f64 {
        match &self.params {
            Params::Logistic { weights, bias } => {
                bias + row.iter().zip(weights).map(|(a, c)| a * c).sum::<f64>()
            }
            Params::Network { w1, b1, w2, b2 } => {
                let p = row.len();
                let mut z = *b2;
                for k in 0..b1.len() {
                    let pre = b1[k] + w1[k * p..(k + 1) * p].iter().zip(row).map(|(a, c)| a * c).sum::<f64>();
                    z += w2[k] * pre.max(0.0);
                }
                z
            }
        }
    }

    pub fn score(&self, d: &Dataset, ids: &[InstanceId], method: &str) -> Result<ScoreSet<f64>> {
        let mut buf = Vec::with_capacity(self.encoder.width());
        let mut scores = Vec::with_capacity(ids.len());
        for &id in ids {
            if id >= d.len() {
                return Err(Error::UnknownId(id));
            }
            self.encoder.row(d, id, &mut buf)?;
            scores.push(sigmoid(self.logit(&buf)));
        }
        ScoreSet::new(method, ids.to_vec(), scores, None)
    }

    pub fn score_split(&self, d: &Dataset, split: &Split, role: SplitRole, method: &str) -> Result<ScoreSet<f64>> {
        let ids = match role {
            SplitRole::Train => &split.train_ids,
            SplitRole::Validation => &split.validation_ids,
            SplitRole::Test => &split.test_ids,
        };
        let mut s = self.score(d, ids, method)?;
        s.produced_on = Some(role);
        Ok(s)
    }

    /// Flat text: one named array per line as `name length v1 v2 ...`,
    /// values written with 17 significant digits.
    pub fn to_text(&self) -> String {
        fn array(out: &mut String, name: &str, values: &[f64]) {
            let _ = write!(out, "{name} {}", values.len());
            for v in values {
                let _ = write!(out, " {v:.16e}");
            }
            out.push('\n');
        }
        let mut out = String::from("# rankaudit scorer v1\n");
        let _ = writeln!(out, "kind {}", self.kind().as_str());
        let _ = writeln!(out, "include_sensitive {}", self.encoder.include_sensitive);
        for slot in &self.encoder.slots {
            match slot {
                Slot::Numeric { column } => {
                    let _ = writeln!(out, "feature numeric 1 {column}");
                }
                Slot::Categorical { column, levels } => {
                    let _ = writeln!(out, "feature categorical {levels} {column}");
                }
            }
        }
        array(&mut out, "mean", &self.encoder.mean);
        array(&mut out, "std", &self.encoder.std);
        match &self.params {
            Params::Logistic { weights, bias } => {
                array(&mut out, "weights", weights);
                array(&mut out, "bias", &[*bias]);
            }
            Params::Network { w1, b1, w2, b2 } => {
                array(&mut out, "w1", w1);
                array(&mut out, "b1", b1);
                array(&mut out, "w2", w2);
                array(&mut out, "b2", &[*b2]);
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Scorer> {
        let bad = |msg: &str| Error::ModelFormat(msg.to_string());
        let mut kind = None;
        let mut include_sensitive = false;
        let mut slots = Vec::new();
        let mut arrays: std::collections::BTreeMap<String, Vec<f64>> = Default::default();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let key = parts.next().ok_or_else(|| bad("empty line"))?;
            match key {
                "kind" => {
                    kind = Some(match parts.next() {
                        Some("logistic") => ModelKind::Logistic,
                        Some("one-hidden-layer") => ModelKind::OneHiddenLayer,
                        _ => return Err(bad("unknown kind")),
                    })
                }
                "include_sensitive" => {
                    include_sensitive = parts.next() == Some("true");
                }
                "feature" => {
                    let kind = parts.next().ok_or_else(|| bad("feature kind"))?;
                    let levels: usize = parts
                        .next()
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| bad("feature levels"))?;
                    let column = parts.collect::<Vec<_>>().join(" ");
                    slots.push(match kind {
                        "numeric" => Slot::Numeric { column },
                        "categorical" => Slot::Categorical { column, levels },
                        _ => return Err(bad("feature kind")),
                    });
                }
                name => {
                    let len: usize = parts
                        .next()
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| bad("array length"))?;
                    let values = parts
                        .map(|v| v.parse::<f64>().map_err(|_| bad("array value")))
                        .collect::<Result<Vec<f64>>>()?;
                    if values.len() != len {
                        return Err(bad(&format!("array `{name}` has wrong length")));
                    }
                    arrays.insert(name.to_string(), values);
                }
            }
        }
        let mut take = |name: &str| arrays.remove(name).ok_or_else(|| bad(&format!("missing `{name}`")));
        let mean = take("mean")?;
        let std = take("std")?;
        let params = match kind.ok_or_else(|| bad("missing kind"))? {
            ModelKind::Logistic => Params::Logistic {
                weights: take("weights")?,
                bias: take("bias")?[0],
            },
            ModelKind::OneHiddenLayer => Params::Network {
                w1: take("w1")?,
                b1: take("b1")?,
                w2: take("w2")?,
                b2: take("b2")?[0],
            },
        };
        let encoder = Encoder {
            slots,
            include_sensitive,
            mean,
            std,
        };
        if encoder.mean.len() != encoder.width() || encoder.std.len() != encoder.width() {
            return Err(bad("standardisation arrays do not match the feature layout"));
        }
        Ok(Scorer {
            encoder,
            params,
            loss_history: Vec::new(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Scorer> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::split;
    use crate::synthetic::{toy_dataset, toy_with_features};

    fn all_train(n: usize) -> Split {
        split(n, (1.0, 0.0, 0.0), 0).unwrap()
    }

    /// 20 points, label 1 iff x1 + x2 > 10, with a margin of at least 1.
    fn separable() -> crate::dataset::Dataset {
        let mut rows = Vec::new();
        let mut x1 = Vec::new();
        let mut x2 = Vec::new();
        for i in 0..20 {
            let a = (i % 5) as f64 * 2.0;
            let b = (i / 5) as f64 * 2.0;
            let positive = a + b > 10.0;
            let shift = if positive { 1.0 } else { -1.0 };
            x1.push(a + shift);
            x2.push(b);
            let g = if i % 2 == 0 { Group::Protected } else { Group::Privileged };
            rows.push((g, u8::from(positive)));
        }
        toy_with_features(&rows, vec![("x1", x1), ("x2", x2)])
    }

    #[test]
    fn separable_fixture_is_fit_perfectly() {
        let d = separable();
        let s = all_train(d.len());
        let cfg = ScorerConfig {
            epochs: 3000,
            l2_penalty: 0.0,
            learning_rate: 0.5,
            ..ScorerConfig::default()
        };
        let m = fit(&d, &s, &cfg).unwrap();
        let scores = m.score(&d, &d.instance_ids(), "base").unwrap();
        let correct = scores
            .scores
            .iter()
            .zip(d.labels())
            .filter(|(s, &y)| (**s > 0.5) == (y == 1))
            .count();
        assert_eq!(correct, 20);
    }

    #[test]
    fn loss_is_finite_and_settles() {
        let d = separable();
        let m = fit(&d, &all_train(d.len()), &ScorerConfig::default()).unwrap();
        let h = m.loss_history();
        assert_eq!(h.len(), 500);
        let tail = &h[h.len() - h.len() / 10..];
        assert!(tail.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn constant_labels_stay_on_majority_side() {
        let rows: Vec<(Group, u8)> = (0..10)
            .map(|i| (if i < 5 { Group::Protected } else { Group::Privileged }, 1))
            .collect();
        let d = toy_dataset(&rows);
        let m = fit(&d, &all_train(10), &ScorerConfig::default()).unwrap();
        let s = m.score(&d, &d.instance_ids(), "base").unwrap();
        assert!(s.scores.iter().all(|&v| v > 0.5));
    }

    #[test]
    fn zero_model_scores_one_half() {
        let d = separable();
        let m = Scorer::zero_logistic(&d, false);
        let s = m.score(&d, &d.instance_ids(), "zero").unwrap();
        assert!(s.scores.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn scoring_is_deterministic_and_row_order_free() {
        let d = separable();
        let m = fit(&d, &all_train(d.len()), &ScorerConfig::default()).unwrap();
        let ids = d.instance_ids();
        let a = m.score(&d, &ids, "base").unwrap();
        let b = m.score(&d, &ids, "base").unwrap();
        assert_eq!(a.scores, b.scores);
        let rev: Vec<usize> = ids.iter().rev().copied().collect();
        let r = m.score(&d, &rev, "base").unwrap();
        let back: Vec<f64> = r.scores.iter().rev().copied().collect();
        assert_eq!(back, a.scores);
        assert!(matches!(m.score(&d, &[99], "x"), Err(Error::UnknownId(99))));
    }

    #[test]
    fn monotone_feature_gives_ordered_scores() {
        let rows: Vec<(Group, u8)> = (0..12)
            .map(|i| (if i % 2 == 0 { Group::Protected } else { Group::Privileged }, u8::from(i >= 6 || i == 4)))
            .collect();
        let d = toy_dataset(&rows);
        let m = fit(&d, &all_train(12), &ScorerConfig::default()).unwrap();
        let s = m.score(&d, &d.instance_ids(), "base").unwrap();
        assert!(s.scores.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn test_labels_do_not_leak_into_scores() {
        let d = separable();
        let sp = split(d.len(), (0.6, 0.2, 0.2), 3).unwrap();
        let m = fit(&d, &sp, &ScorerConfig::default()).unwrap();
        let before = m.score(&d, &sp.test_ids, "base").unwrap();
        // flip every test label; the training rows are untouched
        let mut labels = d.labels().to_vec();
        for &id in &sp.test_ids {
            labels[id] = 1 - labels[id];
        }
        let flipped = crate::dataset::Dataset::from_parts(
            d.spec().clone(),
            d.columns().to_vec(),
            d.groups().to_vec(),
            labels,
        )
        .unwrap();
        let m2 = fit(&flipped, &sp, &ScorerConfig::default()).unwrap();
        assert_eq!(m2.score(&flipped, &sp.test_ids, "base").unwrap().scores, before.scores);
    }

    #[test]
    fn text_round_trip_preserves_scores() {
        let d = separable();
        let m = fit(&d, &all_train(d.len()), &ScorerConfig::default()).unwrap();
        let back = Scorer::from_text(&m.to_text()).unwrap();
        let ids = d.instance_ids();
        assert_eq!(
            back.score(&d, &ids, "b").unwrap().scores,
            m.score(&d, &ids, "b").unwrap().scores
        );
        assert!(m.to_text().lines().any(|l| l.starts_with("weights 2 ")));
    }

    #[test]
    fn small_network_trains() {
        let d = separable();
        let cfg = ScorerConfig {
            hidden_units: 16,
            epochs: 200,
            learning_rate: 0.01,
            batch_size: 8,
            ..ScorerConfig::small_network()
        };
        let m = fit(&d, &all_train(d.len()), &cfg).unwrap();
        let h = m.loss_history();
        assert!(h.last().unwrap() < &h[0]);
        let back = Scorer::from_text(&m.to_text()).unwrap();
        let ids = d.instance_ids();
        assert_eq!(
            back.score(&d, &ids, "n").unwrap().scores,
            m.score(&d, &ids, "n").unwrap().scores
        );
    }

    #[test]
    fn config_validation() {
        let bad = ScorerConfig {
            learning_rate: 0.0,
            ..ScorerConfig::default()
        };
        assert!(bad.validate().is_err());
        let d = separable();
        let empty = split(d.len(), (0.0, 0.5, 0.5), 0).unwrap();
        assert!(matches!(fit(&d, &empty, &ScorerConfig::default()), Err(Error::EmptyTrain)));
    }
}
