//! Exhaustive method-subset selection.
//!
//! Every nonempty channel mask is scored by training a fixed downstream
//! classifier on embeddings produced under that mask. The mask with the best
//! holdout score wins; ties go to the mask with fewer open channels, then to
//! the earlier mask in `T`-before-`F` lexicographic order.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mixer::MaskConfig;
use crate::nn::loss::softmax_cross_entropy;
use crate::nn::{adam_step, epoch_order, AdamState, LayerSpec, Network, NnError, Shape, Tensor};
use crate::rng::stage_rng;

/// Largest channel count [`enumerate_masks`] accepts.
pub const MAX_CHANNELS: usize = 16;

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("channel count {0} is outside 1..=16")]
    ChannelRange(usize),
    #[error("class {class} has {count} samples; every class needs at least 2")]
    SmallClass { class: usize, count: usize },
    #[error("label {label} is not below the class count {class_count}")]
    Label { label: usize, class_count: usize },
    #[error("{samples} samples is fewer than twice the {class_count} classes")]
    TooFewSamples { samples: usize, class_count: usize },
    #[error("embedding matrix has {rows} rows for {labels} labels")]
    RowCount { rows: usize, labels: usize },
    #[error("no masks to evaluate")]
    NoMasks,
    #[error("mask {0} is listed more than once")]
    DuplicateMask(String),
    #[error("mask {mask} does not cover {channels} channels")]
    MaskWidth { mask: String, channels: usize },
    #[error("embedding failed: {0}")]
    Embedding(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Embeddings of a labeled task, `[N × width]`, with their labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledEmbeddingSet {
    embeddings: Tensor<f32>,
    labels: Vec<usize>,
    class_count: usize,
    objective: String,
}

impl LabeledEmbeddingSet {
    pub fn new(
        embeddings: Tensor<f32>,
        labels: Vec<usize>,
        class_count: usize,
        objective: impl Into<String>,
    ) -> Result<Self, SelectionError> {
        if embeddings.shape().len() != 2 || embeddings.rows() != labels.len() {
            return Err(SelectionError::RowCount {
                rows: embeddings.shape().first().copied().unwrap_or(0),
                labels: labels.len(),
            });
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= class_count) {
            return Err(SelectionError::Label { label, class_count });
        }
        if labels.len() < 2 * class_count {
            return Err(SelectionError::TooFewSamples {
                samples: labels.len(),
                class_count,
            });
        }
        Ok(Self {
            embeddings,
            labels,
            class_count,
            objective: objective.into(),
        })
    }

    pub fn embeddings(&self) -> &Tensor<f32> {
        &self.embeddings
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn objective(&self) -> &str {
        &self.objective
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.embeddings.row_width()
    }
}

/// Produces the embeddings of one labeled task under a channel mask.
pub trait MaskedEmbedder {
    fn channel_count(&self) -> usize;
    fn embed_under(&self, mask: &MaskConfig) -> Result<LabeledEmbeddingSet, SelectionError>;
}

/// Plain per-channel features: the columns split into equal channel
/// blocks, and a closed channel's block is zeroed.
#[derive(Clone, Debug)]
pub struct ChannelFeatures {
    data: LabeledEmbeddingSet,
    channel_count: usize,
}

impl ChannelFeatures {
    pub fn new(data: LabeledEmbeddingSet, channel_count: usize) -> Result<Self, SelectionError> {
        if channel_count == 0 || !data.width().is_multiple_of(channel_count) {
            return Err(SelectionError::ChannelRange(channel_count));
        }
        Ok(Self { data, channel_count })
    }
}

impl MaskedEmbedder for ChannelFeatures {
    fn channel_count(&self) -> usize {
        self.channel_count
    }

    fn embed_under(&self, mask: &MaskConfig) -> Result<LabeledEmbeddingSet, SelectionError> {
        let block = self.data.width() / self.channel_count;
        let mut values = self.data.embeddings.data().to_vec();
        for row in values.chunks_exact_mut(self.data.width()) {
            for (c, chunk) in row.chunks_exact_mut(block).enumerate() {
                if !mask.is_open(c) {
                    chunk.fill(0.0);
                }
            }
        }
        Ok(LabeledEmbeddingSet {
            embeddings: Tensor::from_parts(self.data.embeddings.shape().to_vec(), values),
            ..self.data.clone()
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    /// Multinomial logistic regression, zero-initialised.
    Logistic,
    /// `Linear → ReLU → Linear` with the given hidden width.
    Dense { hidden: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    F1Macro,
}

/// Downstream classifier and scoring settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub kind: ClassifierKind,
    pub metric: Metric,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub holdout_fraction: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            kind: ClassifierKind::Logistic,
            metric: Metric::Accuracy,
            epochs: 200,
            learning_rate: 0.01,
            batch_size: 64,
            holdout_fraction: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetReport {
    pub mask: MaskConfig,
    pub phi_train: f64,
    pub phi_holdout: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub objective: String,
    pub best_mask: MaskConfig,
    /// Best holdout score minus the best score among the other masks.
    pub margin: f64,
    /// `|phi_train − phi_holdout|` of the best mask.
    pub gap: f64,
    pub seed: u64,
    pub all_reports: Vec<SubsetReport>,
}

/// All `2ⁿ − 1` nonempty masks in `T`-before-`F` lexicographic order.
pub fn enumerate_masks(n: usize) -> Result<Vec<MaskConfig>, SelectionError> {
    if !(1..=MAX_CHANNELS).contains(&n) {
        return Err(SelectionError::ChannelRange(n));
    }
    // counting up with bit (n-1-i) meaning "channel i closed" walks the
    // strings in order; the last count closes everything and is skipped
    Ok((0..(1u32 << n) - 1)
        .map(|k| {
            let open = (0..n).map(|i| k >> (n - 1 - i) & 1 == 0).collect();
            MaskConfig::new(open).expect("k < 2^n - 1 leaves a channel open")
        })
        .collect())
}

/// Deterministic stratified split; returns `(train, holdout)` indices,
/// each ascending.
pub fn stratified_split(
    labels: &[usize],
    class_count: usize,
    holdout_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), SelectionError> {
    let mut rng = stage_rng(seed, "selection/split");
    let mut train = Vec::new();
    let mut holdout = Vec::new();
    for class in 0..class_count {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < 2 {
            return Err(SelectionError::SmallClass {
                class,
                count: members.len(),
            });
        }
        let order = epoch_order(members.len(), &mut rng);
        let held = ((holdout_fraction * members.len() as f64).round() as usize).clamp(1, members.len() - 1);
        for (rank, &j) in order.iter().enumerate() {
            if rank < held {
                holdout.push(members[j]);
            } else {
                train.push(members[j]);
            }
        }
    }
    train.sort_unstable();
    holdout.sort_unstable();
    Ok((train, holdout))
}

/// Per-column mean and standard deviation over `rows` of `x`.
fn column_stats(x: &Tensor<f32>, rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let w = x.row_width();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; w];
    for &r in rows {
        for (m, &v) in mean.iter_mut().zip(x.row(r)) {
            *m += f64::from(v);
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; w];
    for &r in rows {
        for ((s, &v), m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
            let d = f64::from(v) - m;
            *s += d * d;
        }
    }
    let sd = var.into_iter().map(|s| (s / n).sqrt()).collect();
    (mean, sd)
}

fn standardise(x: &Tensor<f32>, rows: &[usize], mean: &[f64], sd: &[f64]) -> Vec<f32> {
    let mut out = Vec::with_capacity(rows.len() * x.row_width());
    for &r in rows {
        out.extend(x.row(r).iter().zip(mean).zip(sd).map(|((&v, m), s)| {
            if *s > crate::signal::CONSTANT_STDDEV {
                ((f64::from(v) - m) / s) as f32
            } else {
                0.0
            }
        }));
    }
    out
}

fn build_classifier(width: usize, classes: usize, cfg: &ClassifierConfig, seed: u64) -> Result<Network<f32>, NnError> {
    let input = Shape::flat(width);
    match cfg.kind {
        ClassifierKind::Logistic => {
            let specs = [LayerSpec::Linear {
                inputs: width,
                outputs: classes,
            }];
            Network::from_params(input, &specs, vec![vec![0.0; width * classes], vec![0.0; classes]])
        }
        ClassifierKind::Dense { hidden } => {
            let specs = [
                LayerSpec::Linear {
                    inputs: width,
                    outputs: hidden,
                },
                LayerSpec::Relu,
                LayerSpec::Linear {
                    inputs: hidden,
                    outputs: classes,
                },
            ];
            Network::new(input, &specs, &mut stage_rng(seed, "selection/init"))
        }
    }
}

fn predict(net: &Network<f32>, x: &[f32], n: usize, classes: usize) -> Vec<usize> {
    net.forward_batch(x, n)
        .chunks_exact(classes)
        .map(|row| {
            // first maximum wins
            let mut best = 0;
            for (c, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Accuracy or macro-averaged F1 of `predicted` against `truth`.
pub fn score(metric: Metric, predicted: &[usize], truth: &[usize], classes: usize) -> f64 {
    assert_eq!(predicted.len(), truth.len());
    if truth.is_empty() {
        return 0.0;
    }
    match metric {
        Metric::Accuracy => predicted.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / truth.len() as f64,
        Metric::F1Macro => {
            let mut total = 0.0;
            for c in 0..classes {
                let tp = predicted.iter().zip(truth).filter(|&(&p, &t)| p == c && t == c).count() as f64;
                let fp = predicted.iter().zip(truth).filter(|&(&p, &t)| p == c && t != c).count() as f64;
                let fn_ = predicted.iter().zip(truth).filter(|&(&p, &t)| p != c && t == c).count() as f64;
                if tp > 0.0 {
                    total += 2.0 * tp / (2.0 * tp + fp + fn_);
                }
            }
            total / classes as f64
        }
    }
}

/// Trains the downstream classifier on a stratified split of `data` and
/// scores both halves.
pub fn evaluate_subset(
    data: &LabeledEmbeddingSet,
    mask: &MaskConfig,
    seed: u64,
    cfg: &ClassifierConfig,
) -> Result<SubsetReport, SelectionError> {
    let classes = data.class_count;
    let (train, holdout) = stratified_split(&data.labels, classes, cfg.holdout_fraction, seed)?;
    let (mean, sd) = column_stats(&data.embeddings, &train);
    let x_train = standardise(&data.embeddings, &train, &mean, &sd);
    let x_hold = standardise(&data.embeddings, &holdout, &mean, &sd);
    let y_train: Vec<usize> = train.iter().map(|&i| data.labels[i]).collect();
    let y_hold: Vec<usize> = holdout.iter().map(|&i| data.labels[i]).collect();
    let width = data.width();

    let mut net = build_classifier(width, classes, cfg, seed)?;
    let mut state = AdamState::for_params(&net.params());
    let mut rng = stage_rng(seed, "selection/order");
    let mut xb = Vec::with_capacity(cfg.batch_size.max(1) * width);
    let mut yb = Vec::with_capacity(cfg.batch_size.max(1));
    for _ in 0..cfg.epochs {
        for chunk in epoch_order(train.len(), &mut rng).chunks(cfg.batch_size.max(1)) {
            xb.clear();
            yb.clear();
            for &i in chunk {
                xb.extend_from_slice(&x_train[i * width..(i + 1) * width]);
                yb.push(y_train[i]);
            }
            let trace = net.forward_traced(&xb, chunk.len());
            let (_, grad) = softmax_cross_entropy(trace.output(), &yb, classes);
            let g = net.backward_traced(&trace, &grad, false);
            adam_step(&mut net.params_mut(), &g.params, &mut state, cfg.learning_rate);
        }
    }
    let phi_train = score(cfg.metric, &predict(&net, &x_train, train.len(), classes), &y_train, classes);
    let phi_holdout = score(cfg.metric, &predict(&net, &x_hold, holdout.len(), classes), &y_hold, classes);
    Ok(SubsetReport {
        mask: mask.clone(),
        phi_train,
        phi_holdout,
        seed,
    })
}

/// Orders reports best first under the tie-break rule.
fn rank(a: &SubsetReport, b: &SubsetReport) -> Ordering {
    b.phi_holdout
        .total_cmp(&a.phi_holdout)
        .then(a.mask.open_count().cmp(&b.mask.open_count()))
        .then_with(|| {
            // 'T' sorts before 'F'
            let key = |m: &MaskConfig| m.open().iter().map(|&o| !o).collect::<Vec<_>>();
            key(&a.mask).cmp(&key(&b.mask))
        })
}

/// Picks the best mask from already computed reports.
pub fn summarise(objective: &str, reports: Vec<SubsetReport>, seed: u64) -> Result<SelectionResult, SelectionError> {
    let best = reports.iter().min_by(|a, b| rank(a, b)).ok_or(SelectionError::NoMasks)?.clone();
    let runner_up = reports
        .iter()
        .filter(|r| r.mask != best.mask)
        .map(|r| r.phi_holdout)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
    Ok(SelectionResult {
        objective: objective.to_string(),
        margin: runner_up.map_or(0.0, |r| best.phi_holdout - r),
        gap: (best.phi_train - best.phi_holdout).abs(),
        best_mask: best.mask,
        seed,
        all_reports: reports,
    })
}

/// Evaluates every mask in `masks` and selects the best.
pub fn select_best<E: MaskedEmbedder + ?Sized>(
    embedder: &E,
    masks: &[MaskConfig],
    seed: u64,
    cfg: &ClassifierConfig,
) -> Result<SelectionResult, SelectionError> {
    if masks.is_empty() {
        return Err(SelectionError::NoMasks);
    }
    let mut seen = HashSet::new();
    for m in masks {
        if m.len() != embedder.channel_count() {
            return Err(SelectionError::MaskWidth {
                mask: m.to_string(),
                channels: embedder.channel_count(),
            });
        }
        if !seen.insert(m) {
            return Err(SelectionError::DuplicateMask(m.to_string()));
        }
    }
    let mut reports = Vec::with_capacity(masks.len());
    let mut objective = String::new();
    for m in masks {
        let data = embedder.embed_under(m)?;
        objective = data.objective.clone();
        reports.push(evaluate_subset(&data, m, seed, cfg)?);
    }
    summarise(&objective, reports, seed)
}

#[derive(Serialize)]
struct ReportRow<'a> {
    mask: &'a MaskConfig,
    phi_train: f64,
    phi_holdout: f64,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    objective: &'a str,
    masks: Vec<ReportRow<'a>>,
    best_mask: &'a MaskConfig,
    margin: f64,
    gap: f64,
    seed: u64,
}

/// Why a run failed its optional margin or gap gate.
#[derive(Clone, Debug, PartialEq, Error)]
pub enum GateViolation {
    #[error("margin {margin:.4} is below the required epsilon {epsilon}")]
    Margin { margin: f64, epsilon: f64 },
    #[error("gap {gap:.4} exceeds the allowed varsigma {varsigma}")]
    Gap { gap: f64, varsigma: f64 },
}

impl SelectionResult {
    pub fn to_json(&self) -> String {
        let doc = ReportJson {
            objective: &self.objective,
            masks: self
                .all_reports
                .iter()
                .map(|r| ReportRow {
                    mask: &r.mask,
                    phi_train: r.phi_train,
                    phi_holdout: r.phi_holdout,
                })
                .collect(),
            best_mask: &self.best_mask,
            margin: self.margin,
            gap: self.gap,
            seed: self.seed,
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("report serialises");
        s.push('\n');
        s
    }

    /// Aligned text table, one row per mask, best mask starred.
    pub fn to_table(&self) -> String {
        let w = self.all_reports.iter().map(|r| r.mask.len()).max().unwrap_or(4).max(4);
        let mut s = String::new();
        let _ = writeln!(s, "objective: {}", self.objective);
        let _ = writeln!(s, "  {:<w$}  {:>9}  {:>11}", "mask", "phi_train", "phi_holdout");
        for r in &self.all_reports {
            let star = if r.mask == self.best_mask { '*' } else { ' ' };
            let _ = writeln!(
                s,
                "{star} {:<w$}  {:>9.4}  {:>11.4}",
                r.mask.to_string(),
                r.phi_train,
                r.phi_holdout
            );
        }
        let _ = writeln!(
            s,
            "best {}  margin {:.4}  gap {:.4}  seed {}",
            self.best_mask, self.margin, self.gap, self.seed
        );
        s
    }

    /// Checks the optional minimum margin and maximum gap.
    pub fn check_gates(&self, epsilon: Option<f64>, varsigma: Option<f64>) -> Result<(), GateViolation> {
        if let Some(epsilon) = epsilon {
            if self.margin < epsilon {
                return Err(GateViolation::Margin {
                    margin: self.margin,
                    epsilon,
                });
            }
        }
        if let Some(varsigma) = varsigma {
            if self.gap > varsigma {
                return Err(GateViolation::Gap { gap: self.gap, varsigma });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn masks(n: usize) -> Vec<String> {
        enumerate_masks(n).unwrap().iter().map(ToString::to_string).collect()
    }

    #[test]
    fn mask_enumeration() {
        assert_eq!(masks(1), ["T"]);
        assert_eq!(masks(2), ["TT", "TF", "FT"]);
        assert_eq!(masks(4).len(), 15);
        assert_eq!(masks(6).len(), 63);
        assert!(enumerate_masks(0).is_err());
        assert!(enumerate_masks(17).is_err());
        let m = masks(5);
        let mut sorted = m.clone();
        sorted.sort_by_key(|s| s.replace('T', "0").replace('F', "1"));
        assert_eq!(m, sorted);
    }

    fn blobs(n_per: usize, offset: f32, seed: u64, shuffle_labels: bool) -> LabeledEmbeddingSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = 8;
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for c in 0..2 {
            for _ in 0..n_per {
                for j in 0..w {
                    let base = if j == 0 && c == 1 { offset } else { 0.0 };
                    data.push(base + rng.random_range(-1.0f32..1.0) * 1.7);
                }
                labels.push(c);
            }
        }
        if shuffle_labels {
            use rand::seq::SliceRandom;
            labels.shuffle(&mut rng);
        }
        LabeledEmbeddingSet::new(Tensor::new(vec![2 * n_per, w], data).unwrap(), labels, 2, "blobs").unwrap()
    }

    #[test]
    fn separable_classes() {
        let d = blobs(50, 10.0, 1, false);
        let r = evaluate_subset(&d, &MaskConfig::all_open(1), 3, &ClassifierConfig::default()).unwrap();
        assert!(r.phi_holdout >= 0.99, "{r:?}");
        assert_eq!(r, evaluate_subset(&d, &MaskConfig::all_open(1), 3, &ClassifierConfig::default()).unwrap());
    }

    #[test]
    fn split_is_stratified() {
        let labels: Vec<usize> = (0..60).map(|i| i % 3).collect();
        let (tr, ho) = stratified_split(&labels, 3, 0.2, 4).unwrap();
        assert_eq!(ho.len(), 12);
        assert_eq!(tr.len() + ho.len(), 60);
        for c in 0..3 {
            assert_eq!(ho.iter().filter(|&&i| labels[i] == c).count(), 4);
        }
        assert!(stratified_split(&[0, 0, 1], 2, 0.2, 0).is_err());
    }

    #[test]
    fn single_mask_has_zero_margin() {
        let f = ChannelFeatures::new(blobs(20, 10.0, 2, false), 2).unwrap();
        let m: MaskConfig = "TF".parse().unwrap();
        let r = select_best(&f, std::slice::from_ref(&m), 0, &ClassifierConfig::default()).unwrap();
        assert_eq!(r.best_mask, m);
        assert_eq!(r.margin, 0.0);
    }

    #[test]
    fn duplicates_are_rejected() {
        let f = ChannelFeatures::new(blobs(20, 10.0, 2, false), 2).unwrap();
        let m: MaskConfig = "TF".parse().unwrap();
        assert!(matches!(
            select_best(&f, &[m.clone(), m], 0, &ClassifierConfig::default()),
            Err(SelectionError::DuplicateMask(_))
        ));
    }

    #[test]
    fn ties_prefer_fewer_then_earlier_channels() {
        let report = |s: &str, phi| SubsetReport {
            mask: s.parse().unwrap(),
            phi_train: 1.0,
            phi_holdout: phi,
            seed: 0,
        };
        let r = summarise("t", vec![report("TT", 0.9), report("TF", 0.9), report("FT", 0.9)], 0).unwrap();
        assert_eq!(r.best_mask.to_string(), "TF");
        assert_eq!(r.margin, 0.0);
        let r = summarise("t", vec![report("TT", 0.95), report("TF", 0.9), report("FT", 0.8)], 0).unwrap();
        assert_eq!(r.best_mask.to_string(), "TT");
        assert!((r.margin - 0.05).abs() < 1e-12);
        assert!((r.gap - 0.05).abs() < 1e-12);
    }

    #[test]
    fn f1_macro() {
        let truth = [0, 0, 1, 1];
        assert_eq!(score(Metric::F1Macro, &truth, &truth, 2), 1.0);
        // predicting class 0 everywhere: F1 = 2/3 for class 0, 0 for class 1
        let f = score(Metric::F1Macro, &[0, 0, 0, 0], &truth, 2);
        assert!((f - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn gates() {
        let r = SelectionResult {
            objective: "o".into(),
            best_mask: "T".parse().unwrap(),
            margin: 0.01,
            gap: 0.2,
            seed: 0,
            all_reports: vec![],
        };
        assert!(r.check_gates(None, None).is_ok());
        assert!(matches!(r.check_gates(Some(0.05), None), Err(GateViolation::Margin { .. })));
        assert!(matches!(r.check_gates(None, Some(0.1)), Err(GateViolation::Gap { .. })));
    }

    #[test]
    fn json_and_table() {
        let f = ChannelFeatures::new(blobs(20, 10.0, 5, false), 2).unwrap();
        let r = select_best(&f, &enumerate_masks(2).unwrap(), 1, &ClassifierConfig::default()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["masks"].as_array().unwrap().len(), 3);
        assert_eq!(v["best_mask"], r.best_mask.to_string());
        assert_eq!(r.to_table().lines().count(), 6);
    }
}
