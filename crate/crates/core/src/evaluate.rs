//! Soft-voting combination, confusion-matrix metrics and stratified k-fold
//! cross-validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dataset::ClassLabel;
use crate::error::{Error, Result};
use crate::nn::loss::PROB_FLOOR;

/// Per-class probabilities in `ClassLabel` order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbVector(pub [f64; 3]);

impl ProbVector {
    pub const SUM_TOLERANCE: f64 = 1e-6;

    pub fn new(p: [f64; 3]) -> Result<Self> {
        if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument(format!("probabilities {p:?} outside [0, 1]")));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::InvalidArgument(format!("probabilities {p:?} sum to {sum}")));
        }
        Ok(ProbVector(p))
    }

    pub fn from_slice(p: &[f64]) -> Result<Self> {
        let arr: [f64; 3] = p
            .try_into()
            .map_err(|_| Error::Shape(format!("expected 3 probabilities, got {}", p.len())))?;
        Self::new(arr)
    }

    pub fn uniform() -> Self {
        ProbVector([1.0 / 3.0; 3])
    }

    pub fn one_hot(label: ClassLabel) -> Self {
        let mut p = [0.0; 3];
        p[label.index()] = 1.0;
        ProbVector(p)
    }

    pub fn values(&self) -> [f64; 3] {
        self.0
    }
}

/// Unweighted arithmetic mean of the members' probability vectors.
pub fn ensemble_average(preds: &[ProbVector]) -> Result<ProbVector> {
    if preds.is_empty() {
        return Err(Error::InvalidArgument("ensemble of zero predictions".into()));
    }
    let n = preds.len() as f64;
    let mut out = [0.0; 3];
    for p in preds {
        for (o, v) in out.iter_mut().zip(p.0) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|v| *v /= n);
    Ok(ProbVector(out))
}

/// Highest-probability class; the lowest index wins ties.
pub fn argmax_class(p: &ProbVector) -> ClassLabel {
    let mut best = 0;
    for i in 1..3 {
        if p.0[i] > p.0[best] {
            best = i;
        }
    }
    ClassLabel::from_index(best).expect("index < 3")
}

/// `counts[true][predicted]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..3).map(|i| self.counts[i][i]).sum()
    }

    pub fn tp(&self, c: usize) -> u64 {
        self.counts[c][c]
    }

    pub fn fp(&self, c: usize) -> u64 {
        (0..3).filter(|&t| t != c).map(|t| self.counts[t][c]).sum()
    }

    pub fn fn_(&self, c: usize) -> u64 {
        (0..3).filter(|&p| p != c).map(|p| self.counts[c][p]).sum()
    }

    pub fn tn(&self, c: usize) -> u64 {
        self.total() - self.tp(c) - self.fp(c) - self.fn_(c)
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for t in 0..3 {
            for p in 0..3 {
                self.counts[t][p] += other.counts[t][p];
            }
        }
    }
}

pub fn confusion(preds: &[ClassLabel], truth: &[ClassLabel]) -> Result<ConfusionMatrix> {
    if preds.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            preds.len(),
            truth.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::InvalidArgument("confusion matrix of zero samples".into()));
    }
    let mut cm = ConfusionMatrix::default();
    for (p, t) in preds.iter().zip(truth) {
        cm.counts[t.index()][p.index()] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: [f64; 3],
    pub recall: [f64; 3],
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
    /// Zero-denominator notes, e.g. `precision_undefined:NSR`.
    pub flags: Vec<String>,
}

/// Precision `TP / (TP + FP)` and recall `TP / (TP + FN)` per class one-vs-rest. A zero
/// denominator yields 0 and a flag.
pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::InvalidArgument("metrics of an empty confusion matrix".into()));
    }
    let mut flags = Vec::new();
    let mut precision = [0.0; 3];
    let mut recall = [0.0; 3];
    for c in 0..3 {
        let name = ClassLabel::from_index(c).expect("class").name();
        let (tp, fp, fn_) = (cm.tp(c), cm.fp(c), cm.fn_(c));
        if tp + fp == 0 {
            flags.push(format!("precision_undefined:{name}"));
        } else {
            precision[c] = tp as f64 / (tp + fp) as f64;
        }
        if tp + fn_ == 0 {
            flags.push(format!("recall_undefined:{name}"));
        } else {
            recall[c] = tp as f64 / (tp + fn_) as f64;
        }
    }
    let tp_all: u64 = (0..3).map(|c| cm.tp(c)).sum();
    let fp_all: u64 = (0..3).map(|c| cm.fp(c)).sum();
    let fn_all: u64 = (0..3).map(|c| cm.fn_(c)).sum();
    Ok(Metrics {
        accuracy: cm.trace() as f64 / total as f64,
        precision,
        recall,
        macro_precision: precision.iter().sum::<f64>() / 3.0,
        macro_recall: recall.iter().sum::<f64>() / 3.0,
        micro_precision: tp_all as f64 / (tp_all + fp_all) as f64,
        micro_recall: tp_all as f64 / (tp_all + fn_all) as f64,
        flags,
    })
}

/// Mean of `-ln p[true]` with the same floor as the training loss.
pub fn mean_log_loss(preds: &[ProbVector], truth: &[ClassLabel]) -> Result<f64> {
    if preds.len() != truth.len() || preds.is_empty() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            preds.len(),
            truth.len()
        )));
    }
    let total: f64 = preds
        .iter()
        .zip(truth)
        .map(|(p, t)| -p.0[t.index()].max(PROB_FLOOR).ln())
        .sum();
    Ok(total / preds.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    /// Indices outside fold `i`, ascending.
    pub fn train_indices(&self, i: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        v.sort_unstable();
        v
    }
}

/// Stratified split: within each class (in index order) the members are shuffled and
/// dealt round-robin, the deal continuing across classes so overall fold sizes differ
/// by at most one.
pub fn kfold_split(labels: &[ClassLabel], k: usize, seed: u64) -> Result<FoldPlan> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for class in ClassLabel::ALL {
        let mut members: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == class)
            .map(|(i, _)| i)
            .collect();
        if members.len() < k {
            return Err(Error::Data(format!(
                "class {class} has {} members, fewer than k = {k}",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for idx in members {
            folds[next].push(idx);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(FoldPlan { k, seed, folds })
}

/// Something that can be trained on some indices and asked for probabilities on others.
pub trait FoldLearner {
    fn fit_predict(&mut self, fold: usize, train: &[usize], test: &[usize]) -> Result<Vec<ProbVector>>;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldReport {
    pub fold: usize,
    pub samples: usize,
    pub loss: f64,
    pub metrics: Metrics,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Population standard deviation.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        MeanStd { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub loss: MeanStd,
    pub accuracy: MeanStd,
    pub macro_precision: MeanStd,
    pub macro_recall: MeanStd,
    /// Metrics of the confusion matrix summed over all folds.
    pub pooled: Metrics,
    pub pooled_confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossValReport {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldReport>,
    pub aggregate: Aggregate,
}

#[derive(Serialize)]
struct FoldLine<'a> {
    record: &'static str,
    fold: usize,
    samples: usize,
    loss: f64,
    accuracy: f64,
    precision: [f64; 3],
    recall: [f64; 3],
    macro_precision: f64,
    macro_recall: f64,
    confusion: [[u64; 3]; 3],
    flags: &'a [String],
}

#[derive(Serialize)]
struct AggregateLine<'a> {
    record: &'static str,
    k: usize,
    seed: u64,
    loss: MeanStd,
    accuracy: MeanStd,
    macro_precision: MeanStd,
    macro_recall: MeanStd,
    pooled_accuracy: f64,
    pooled_precision: [f64; 3],
    pooled_recall: [f64; 3],
    pooled_confusion: [[u64; 3]; 3],
    flags: &'a [String],
}

impl CrossValReport {
    /// One JSON object per line: each fold (`"record":"fold"`), then `"record":"aggregate"`.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for f in &self.folds {
            let line = FoldLine {
                record: "fold",
                fold: f.fold,
                samples: f.samples,
                loss: f.loss,
                accuracy: f.metrics.accuracy,
                precision: f.metrics.precision,
                recall: f.metrics.recall,
                macro_precision: f.metrics.macro_precision,
                macro_recall: f.metrics.macro_recall,
                confusion: f.confusion.counts,
                flags: &f.metrics.flags,
            };
            out.push_str(&serde_json::to_string(&line).expect("serializable"));
            out.push('\n');
        }
        let a = &self.aggregate;
        let line = AggregateLine {
            record: "aggregate",
            k: self.k,
            seed: self.seed,
            loss: a.loss,
            accuracy: a.accuracy,
            macro_precision: a.macro_precision,
            macro_recall: a.macro_recall,
            pooled_accuracy: a.pooled.accuracy,
            pooled_precision: a.pooled.precision,
            pooled_recall: a.pooled.recall,
            pooled_confusion: a.pooled_confusion.counts,
            flags: &a.pooled.flags,
        };
        out.push_str(&serde_json::to_string(&line).expect("serializable"));
        out.push('\n');
        out
    }
}

/// Trains on every fold complement and scores the held-out fold.
pub fn cross_validate(plan: &FoldPlan, labels: &[ClassLabel], learner: &mut dyn FoldLearner) -> Result<CrossValReport> {
    let mut folds = Vec::with_capacity(plan.k);
    let mut pooled = ConfusionMatrix::default();
    for (i, test) in plan.folds.iter().enumerate() {
        let train = plan.train_indices(i);
        let probs = learner.fit_predict(i, &train, test)?;
        if probs.len() != test.len() {
            return Err(Error::Shape(format!(
                "learner returned {} predictions for {} test samples",
                probs.len(),
                test.len()
            )));
        }
        let truth: Vec<ClassLabel> = test.iter().map(|&j| labels[j]).collect();
        let preds: Vec<ClassLabel> = probs.iter().map(argmax_class).collect();
        let cm = confusion(&preds, &truth)?;
        pooled.merge(&cm);
        folds.push(FoldReport {
            fold: i,
            samples: test.len(),
            loss: mean_log_loss(&probs, &truth)?,
            metrics: metrics(&cm)?,
            confusion: cm,
        });
    }
    let col = |f: fn(&FoldReport) -> f64| MeanStd::of(&folds.iter().map(f).collect::<Vec<_>>());
    let aggregate = Aggregate {
        loss: col(|f| f.loss),
        accuracy: col(|f| f.metrics.accuracy),
        macro_precision: col(|f| f.metrics.macro_precision),
        macro_recall: col(|f| f.metrics.macro_recall),
        pooled: metrics(&pooled)?,
        pooled_confusion: pooled,
    };
    Ok(CrossValReport {
        k: plan.k,
        seed: plan.seed,
        folds,
        aggregate,
    })
}
