use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::{export_arrays, import_arrays, Checkpoint, ROLE_CHECKPOINT, ROLE_FROZEN_BACKBONE};
use super::spec::{ClassifierSpec, ModelProfile};
use crate::dataset::ClassLabel;
use crate::error::{Error, Result};
use crate::evaluate::{ensemble_average, FoldLearner, ProbVector};
use crate::imaging::{AugmentPolicy, RgbImage, IMAGE_SIZE};
use crate::io::{derive_seed, write_atomic};
use crate::nn::{cross_entropy, softmax_cross_entropy_backward, Adam, Layer, Mode, Network, Tensor};

/// Samples per forward pass when only inference is needed.
const INFER_CHUNK: usize = 16;

/// Pixels scaled to `[0, 1]`, shape `(1, 224, 224, 3)`.
pub fn image_tensor(img: &RgbImage) -> Tensor<f32> {
    images_tensor(std::slice::from_ref(img))
}

pub fn images_tensor(imgs: &[RgbImage]) -> Tensor<f32> {
    let mut data = Vec::with_capacity(imgs.len() * IMAGE_SIZE * IMAGE_SIZE * 3);
    for img in imgs {
        data.extend(img.as_bytes().iter().map(|&b| f32::from(b) / 255.0));
    }
    Tensor::from_vec(&[imgs.len(), IMAGE_SIZE, IMAGE_SIZE, 3], data).expect("image sized")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub augment_policy: AugmentPolicy,
    /// History rows are recorded every this many epochs, and always for the last one.
    pub metrics_every: usize,
    /// Ends training once the training accuracy of a recorded epoch reaches this value.
    pub stop_at_train_accuracy: Option<f64>,
    /// Held-out share for the stratified validation split of plain training.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::for_profile(ModelProfile::Ensemble)
    }
}

impl TrainConfig {
    pub fn for_profile(profile: ModelProfile) -> Self {
        let (epochs, batch_size) = match profile {
            ModelProfile::CustomCnn => (200, 128),
            ModelProfile::Ensemble => (80, 1),
        };
        TrainConfig {
            epochs,
            batch_size,
            learning_rate: 0.05,
            seed: 0,
            augment_policy: AugmentPolicy::default(),
            metrics_every: 1,
            stop_at_train_accuracy: None,
            validation_fraction: 0.2,
        }
    }

    /// Cross-validation runs fewer epochs per fold.
    pub fn for_crossval(profile: ModelProfile) -> Self {
        TrainConfig {
            epochs: 20,
            ..Self::for_profile(profile)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.metrics_every == 0 {
            return Err(Error::Config("metrics_every must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Config(format!("invalid learning_rate {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config(format!(
                "validation_fraction {} outside [0, 1)",
                self.validation_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub train_acc: f64,
    pub val_acc: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct History {
    pub rows: Vec<EpochRecord>,
}

impl History {
    pub const CSV_HEADER: &'static str = "epoch,train_loss,val_loss,train_acc,val_acc";

    /// Missing validation values are left empty.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.epoch,
                r.train_loss,
                opt(r.val_loss),
                r.train_acc,
                opt(r.val_acc)
            ));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(Self::CSV_HEADER) {
            return Err(Error::Parse {
                path: "history".into(),
                line: 1,
                detail: format!("expected header `{}`", Self::CSV_HEADER),
            });
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let bad = |detail: String| Error::Parse {
                path: "history".into(),
                line: i + 2,
                detail,
            };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad(format!("expected 5 fields, got {}", f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("`{s}`: {e}")));
            let opt = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
            rows.push(EpochRecord {
                epoch: f[0].parse().map_err(|e| bad(format!("`{}`: {e}", f[0])))?,
                train_loss: num(f[1])?,
                val_loss: opt(f[2])?,
                train_acc: num(f[3])?,
                val_acc: opt(f[4])?,
            });
        }
        Ok(History { rows })
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.rows.last()
    }
}

/// Stratified holdout: within each class the members are shuffled and the first
/// `round(fraction * count)` go to validation. Returns `(train, validation)`, ascending.
pub fn stratified_holdout(labels: &[ClassLabel], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for class in ClassLabel::ALL {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        let take = ((fraction * members.len() as f64).round() as usize).min(members.len().saturating_sub(1));
        val.extend_from_slice(&members[..take]);
        train.extend_from_slice(&members[take..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

fn frozen_slots(net: &Network<f32>) -> Vec<String> {
    net.slots
        .iter()
        .filter(|s| s.frozen)
        .map(|s| format!("{}.", s.name))
        .collect()
}

fn has_train_batchnorm(net: &Network<f32>, start: usize) -> bool {
    net.slots[start..]
        .iter()
        .any(|s| matches!(s.layer, Layer::BatchNorm(_)))
}

fn with_epoch(e: Error, epoch: usize) -> Error {
    match e {
        Error::Divergence { detail, .. } => Error::Divergence { epoch, detail },
        other => other,
    }
}

fn gather(x: &Tensor<f32>, idx: &[usize]) -> Tensor<f32> {
    let rows: Vec<Tensor<f32>> = idx.iter().map(|&i| x.slice_batch(i, i + 1)).collect();
    let refs: Vec<&Tensor<f32>> = rows.iter().collect();
    Tensor::concat_batch(&refs).expect("rows share a shape")
}

/// Inference-mode probabilities of layers `start..` over `x`, in chunks.
fn infer_from(net: &mut Network<f32>, x: &Tensor<f32>, start: usize) -> Result<Vec<ProbVector>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut out = Vec::with_capacity(x.batch());
    let end = net.len();
    for lo in (0..x.batch()).step_by(INFER_CHUNK) {
        let hi = (lo + INFER_CHUNK).min(x.batch());
        let p = net.forward_range(&x.slice_batch(lo, hi), start, end, Mode::Infer, &mut rng)?;
        for row in p.data().chunks_exact(3) {
            out.push(prob_row(row));
        }
    }
    Ok(out)
}

/// Softmax rows carry float rounding; renormalize in f64 before validating.
fn prob_row(row: &[f32]) -> ProbVector {
    let v: Vec<f64> = row.iter().map(|&p| f64::from(p)).collect();
    let s: f64 = v.iter().sum();
    ProbVector([v[0] / s, v[1] / s, v[2] / s])
}

/// Activations after the frozen, deterministic prefix of `net`; returns the layer index
/// to resume from.
pub fn frozen_features(net: &mut Network<f32>, x: &Tensor<f32>) -> Result<(usize, Tensor<f32>)> {
    let p = net.frozen_prefix_len();
    if p == 0 {
        return Ok((0, x.clone()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut parts = Vec::new();
    for lo in (0..x.batch()).step_by(INFER_CHUNK) {
        let hi = (lo + INFER_CHUNK).min(x.batch());
        parts.push(net.forward_range(&x.slice_batch(lo, hi), 0, p, Mode::Infer, &mut rng)?);
    }
    let refs: Vec<&Tensor<f32>> = parts.iter().collect();
    Ok((p, Tensor::concat_batch(&refs)?))
}

/// Per-member training state over cached inputs of layers `start..`.
struct MemberRun<'a> {
    net: &'a mut Network<f32>,
    start: usize,
    features: &'a Tensor<f32>,
    adam: Adam<f32>,
    rng: ChaCha8Rng,
}

impl MemberRun<'_> {
    fn batches(&mut self, rows: &[usize], batch_size: usize) -> Vec<Vec<usize>> {
        let mut order = rows.to_vec();
        order.shuffle(&mut self.rng);
        let mut batches: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
        // batchnorm needs at least two samples per training batch
        if has_train_batchnorm(self.net, self.start)
            && batches.len() > 1
            && batches.last().is_some_and(|b| b.len() == 1)
        {
            let tail = batches.pop().expect("non-empty");
            batches.last_mut().expect("non-empty").extend(tail);
        }
        batches
    }

    fn epoch(&mut self, rows: &[usize], labels: &[usize], cfg: &TrainConfig, epoch: usize) -> Result<()> {
        let stop = self.start.max(self.net.first_trainable());
        let end = self.net.len();
        for batch in self.batches(rows, cfg.batch_size) {
            let x = gather(self.features, &batch);
            let y: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let probs = self
                .net
                .forward_range(&x, self.start, end, Mode::Train, &mut self.rng)
                .map_err(|e| with_epoch(e, epoch))?;
            let loss = cross_entropy(&probs, &y)?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    detail: format!("loss {loss}"),
                });
            }
            let grad = softmax_cross_entropy_backward(&probs, &y)?;
            if stop < end - 1 {
                self.net.backward_logits(&grad, stop, false)?;
                self.adam.step(self.net.trainable_params_mut())?;
            }
        }
        Ok(())
    }
}

fn score(probs: &[ProbVector], labels: &[usize]) -> (f64, f64) {
    let floor = crate::nn::loss::PROB_FLOOR;
    let n = labels.len() as f64;
    let loss = probs
        .iter()
        .zip(labels)
        .map(|(p, &l)| -p.0[l].max(floor).ln())
        .sum::<f64>()
        / n;
    let correct = probs
        .iter()
        .zip(labels)
        .filter(|(p, &l)| crate::evaluate::argmax_class(p).index() == l)
        .count();
    (loss, correct as f64 / n)
}

/// Rows of `features[m]` to use for training and validation.
pub struct TrainData<'a> {
    pub features: &'a [Tensor<f32>],
    pub starts: &'a [usize],
    pub labels: &'a [usize],
    pub train: &'a [usize],
    pub val: &'a [usize],
}

/// Trains all members in lockstep, one epoch each, from their cached inputs. Each member
/// minimizes its own cross entropy; history rows score the averaged prediction.
pub fn train_on_features(
    members: &mut [Network<f32>],
    data: &TrainData,
    cfg: &TrainConfig,
    stream: u64,
) -> Result<History> {
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(Error::Data("no training samples".into()));
    }
    if members.len() != data.features.len() || members.len() != data.starts.len() {
        return Err(Error::Shape("one feature tensor per member required".into()));
    }
    let mut runs: Vec<MemberRun> = members
        .iter_mut()
        .zip(data.features.iter().zip(data.starts))
        .enumerate()
        .map(|(i, (net, (features, &start)))| MemberRun {
            net,
            start,
            features,
            adam: Adam::new(cfg.learning_rate),
            rng: ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "train", (stream << 8) | i as u64)),
        })
        .collect();
    let train_y: Vec<usize> = data.train.iter().map(|&i| data.labels[i]).collect();
    let val_y: Vec<usize> = data.val.iter().map(|&i| data.labels[i]).collect();
    let mut history = History::default();
    for epoch in 1..=cfg.epochs {
        for run in &mut runs {
            run.epoch(data.train, data.labels, cfg, epoch)?;
        }
        if epoch % cfg.metrics_every != 0 && epoch != cfg.epochs {
            continue;
        }
        let predict = |runs: &mut [MemberRun], rows: &[usize]| -> Result<Vec<ProbVector>> {
            let mut per_member = Vec::with_capacity(runs.len());
            for run in runs.iter_mut() {
                let x = gather(run.features, rows);
                per_member.push(infer_from(run.net, &x, run.start).map_err(|e| with_epoch(e, epoch))?);
            }
            (0..rows.len())
                .map(|k| ensemble_average(&per_member.iter().map(|m| m[k]).collect::<Vec<_>>()))
                .collect()
        };
        let (train_loss, train_acc) = score(&predict(&mut runs, data.train)?, &train_y);
        if !train_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                detail: format!("training loss {train_loss}"),
            });
        }
        let (val_loss, val_acc) = if data.val.is_empty() {
            (None, None)
        } else {
            let (l, a) = score(&predict(&mut runs, data.val)?, &val_y);
            (Some(l), Some(a))
        };
        history.rows.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            train_acc,
            val_acc,
        });
        if cfg.stop_at_train_accuracy.is_some_and(|t| train_acc >= t) {
            break;
        }
    }
    Ok(history)
}

/// A trained (or freshly initialized) set of member networks whose probabilities are averaged.
#[derive(Debug, Clone)]
pub struct Classifier {
    pub profile: ModelProfile,
    pub spec: ClassifierSpec,
    pub members: Vec<Network<f32>>,
}

impl Classifier {
    pub fn new(profile: ModelProfile, backbone_seed: u64, head_seed: u64) -> Result<Self> {
        let spec = ClassifierSpec::for_profile(profile);
        let members = spec.instantiate(backbone_seed, head_seed)?;
        Ok(Classifier { profile, spec, members })
    }

    pub fn digest(&self) -> u64 {
        self.spec.digest()
    }

    pub fn param_count(&self) -> usize {
        self.members.iter().map(Network::param_count).sum()
    }

    pub fn trainable_param_count(&self) -> usize {
        self.members.iter().map(Network::trainable_param_count).sum()
    }

    fn prefix(i: usize) -> String {
        format!("m{i}.")
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let arrays = self
            .members
            .iter()
            .enumerate()
            .flat_map(|(i, m)| export_arrays(m, &Self::prefix(i), |_| true))
            .collect();
        Checkpoint {
            role: ROLE_CHECKPOINT.into(),
            digest: self.digest(),
            arrays,
        }
    }

    pub fn from_checkpoint(profile: ModelProfile, ckpt: &Checkpoint) -> Result<Self> {
        let mut c = Classifier::new(profile, 0, 0)?;
        ckpt.expect(ROLE_CHECKPOINT, c.digest())?;
        let expected: usize = c.members.iter().map(|m| m.named_arrays().len()).sum();
        if ckpt.arrays.len() != expected {
            return Err(Error::CorruptCheckpoint(format!(
                "{} arrays, model has {expected}",
                ckpt.arrays.len()
            )));
        }
        for (i, m) in c.members.iter_mut().enumerate() {
            import_arrays(m, ckpt, &Self::prefix(i), |_| true)?;
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(profile: ModelProfile, path: &Path) -> Result<Self> {
        Self::from_checkpoint(profile, &Checkpoint::load(path)?)
    }

    /// Parameters of every frozen layer, for sharing a fixed feature extractor.
    pub fn backbone_checkpoint(&self) -> Checkpoint {
        let arrays = self
            .members
            .iter()
            .enumerate()
            .flat_map(|(i, m)| {
                let frozen = frozen_slots(m);
                export_arrays(m, &Self::prefix(i), |n| frozen.iter().any(|f| n.starts_with(f)))
            })
            .collect();
        Checkpoint {
            role: ROLE_FROZEN_BACKBONE.into(),
            digest: self.digest(),
            arrays,
        }
    }

    pub fn load_backbone(&mut self, ckpt: &Checkpoint) -> Result<()> {
        ckpt.expect(ROLE_FROZEN_BACKBONE, self.digest())?;
        for (i, m) in self.members.iter_mut().enumerate() {
            let frozen = frozen_slots(m);
            import_arrays(m, ckpt, &Self::prefix(i), |n| frozen.iter().any(|f| n.starts_with(f)))?;
        }
        Ok(())
    }

    pub fn save_backbone(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.backbone_checkpoint().encode())
    }

    pub fn load_backbone_file(&mut self, path: &Path) -> Result<()> {
        self.load_backbone(&Checkpoint::load(path)?)
    }

    /// Inference-mode soft-vote prediction for each image.
    pub fn predict_batch(&mut self, imgs: &[RgbImage]) -> Result<Vec<ProbVector>> {
        let mut out = Vec::with_capacity(imgs.len());
        for chunk in imgs.chunks(INFER_CHUNK) {
            out.extend(self.predict_tensor(&images_tensor(chunk))?);
        }
        Ok(out)
    }

    pub fn predict(&mut self, img: &RgbImage) -> Result<ProbVector> {
        Ok(self.predict_batch(std::slice::from_ref(img))?[0])
    }

    /// Frozen-prefix features of every member for `x`.
    pub fn features(&mut self, x: &Tensor<f32>) -> Result<(Vec<usize>, Vec<Tensor<f32>>)> {
        let mut starts = Vec::new();
        let mut feats = Vec::new();
        for m in &mut self.members {
            let (s, f) = frozen_features(m, x)?;
            starts.push(s);
            feats.push(f);
        }
        Ok((starts, feats))
    }

    /// Trains on `imgs`, holding out a stratified validation share per `cfg`.
    pub fn train(&mut self, imgs: &[RgbImage], labels: &[ClassLabel], cfg: &TrainConfig) -> Result<History> {
        cfg.validate()?;
        let (train, val) = stratified_holdout(labels, cfg.validation_fraction, derive_seed(cfg.seed, "holdout", 0));
        self.train_split(imgs, labels, &train, &val, cfg)
    }

    /// Trains on the `train` rows of `imgs` and scores the `val` rows each recorded epoch.
    pub fn train_split(
        &mut self,
        imgs: &[RgbImage],
        labels: &[ClassLabel],
        train: &[usize],
        val: &[usize],
        cfg: &TrainConfig,
    ) -> Result<History> {
        cfg.validate()?;
        if imgs.is_empty() || imgs.len() != labels.len() {
            return Err(Error::Data(format!(
                "{} images with {} labels",
                imgs.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = train.iter().chain(val).find(|&&i| i >= imgs.len()) {
            return Err(Error::InvalidArgument(format!("row {bad} out of range")));
        }
        let x = images_tensor(imgs);
        let (starts, feats) = self.features(&x)?;
        drop(x);
        let y: Vec<usize> = labels.iter().map(|l| l.index()).collect();
        let data = TrainData {
            features: &feats,
            starts: &starts,
            labels: &y,
            train,
            val,
        };
        train_on_features(&mut self.members, &data, cfg, 0)
    }

    /// Inference-mode predictions for already-decoded inputs.
    pub fn predict_tensor(&mut self, x: &Tensor<f32>) -> Result<Vec<ProbVector>> {
        let per_member: Vec<Vec<ProbVector>> = self
            .members
            .iter_mut()
            .map(|m| infer_from(m, x, 0))
            .collect::<Result<_>>()?;
        (0..x.batch())
            .map(|k| ensemble_average(&per_member.iter().map(|m| m[k]).collect::<Vec<_>>()))
            .collect()
    }
}

/// Cross-validation learner over cached member features. With
/// [`AugmentPolicy::TrainOnly`], `extra_train[i]` lists the augmented rows that join
/// sample `i` whenever it is in a training fold.
pub struct EnsembleFoldLearner {
    pub template: Classifier,
    pub starts: Vec<usize>,
    pub features: Vec<Tensor<f32>>,
    pub labels: Vec<usize>,
    /// Row of sample `i` in the feature tensors.
    pub rows: Vec<usize>,
    pub extra_train: Vec<Vec<usize>>,
    pub cfg: TrainConfig,
    pub histories: Vec<History>,
}

impl EnsembleFoldLearner {
    /// `labels` and `rows` index the cross-validation samples; `row_labels` covers every feature row.
    pub fn new(
        mut template: Classifier,
        x: &Tensor<f32>,
        row_labels: &[ClassLabel],
        rows: Vec<usize>,
        extra_train: Vec<Vec<usize>>,
        cfg: TrainConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if rows.len() != extra_train.len() {
            return Err(Error::Shape("one extra-row list per sample required".into()));
        }
        let (starts, features) = template.features(x)?;
        Ok(EnsembleFoldLearner {
            template,
            starts,
            features,
            labels: row_labels.iter().map(|l| l.index()).collect(),
            rows,
            extra_train,
            cfg,
            histories: Vec::new(),
        })
    }
}

impl FoldLearner for EnsembleFoldLearner {
    fn fit_predict(&mut self, fold: usize, train: &[usize], test: &[usize]) -> Result<Vec<ProbVector>> {
        let mut members = ClassifierSpec::for_profile(self.template.profile)
            .instantiate::<f32>(0, derive_seed(self.cfg.seed, "fold", fold as u64))?;
        // frozen layers come from the shared template
        for (m, t) in members.iter_mut().zip(&self.template.members) {
            for (slot, tslot) in m.slots.iter_mut().zip(&t.slots) {
                if slot.frozen {
                    slot.layer = tslot.layer.clone();
                }
            }
        }
        let mut train_rows: Vec<usize> = Vec::new();
        for &i in train {
            train_rows.push(self.rows[i]);
            train_rows.extend_from_slice(&self.extra_train[i]);
        }
        let test_rows: Vec<usize> = test.iter().map(|&i| self.rows[i]).collect();
        let data = TrainData {
            features: &self.features,
            starts: &self.starts,
            labels: &self.labels,
            train: &train_rows,
            val: &test_rows,
        };
        let history = train_on_features(&mut members, &data, &self.cfg, fold as u64 + 1)?;
        self.histories.push(history);
        let mut per_member = Vec::with_capacity(members.len());
        for (m, (f, &s)) in members.iter_mut().zip(self.features.iter().zip(&self.starts)) {
            per_member.push(infer_from(m, &gather(f, &test_rows), s)?);
        }
        (0..test_rows.len())
            .map(|k| ensemble_average(&per_member.iter().map(|m| m[k]).collect::<Vec<_>>()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn holdout_is_stratified_and_disjoint() {
        let mut labels = vec![ClassLabel::Arr; 10];
        labels.extend([ClassLabel::Nsr; 5]);
        labels.extend([ClassLabel::Chf; 5]);
        let (t, v) = stratified_holdout(&labels, 0.2, 1);
        assert_eq!(v.len(), 4);
        assert_eq!(t.len() + v.len(), 20);
        assert!(t.iter().all(|i| !v.contains(i)));
    }

    #[test]
    fn history_csv_round_trip() {
        let h = History {
            rows: vec![
                EpochRecord {
                    epoch: 1,
                    train_loss: 1.25,
                    val_loss: None,
                    train_acc: 0.5,
                    val_acc: None,
                },
                EpochRecord {
                    epoch: 2,
                    train_loss: 0.75,
                    val_loss: Some(0.8),
                    train_acc: 0.75,
                    val_acc: Some(0.5),
                },
            ],
        };
        assert_eq!(History::from_csv(&h.to_csv()).unwrap(), h);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
    }
}
