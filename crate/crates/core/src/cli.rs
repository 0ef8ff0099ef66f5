//! Command-line front end. Every command reads a [`PipelineConfig`], validates it before
//! touching outputs, and writes its artifacts under the output directory:
//!
//! | command     | reads                               | writes                                        |
//! |-------------|-------------------------------------|-----------------------------------------------|
//! | `synth`     | -                                   | `<dataset_root>/<CLASS>/*.f64` + `.fs`        |
//! | `prepare`   | `dataset_root`                      | `signals/*.f64`, `manifest.csv`               |
//! | `transform` | `manifest.csv`                      | `images/*.png`, `images.csv`                  |
//! | `augment`   | `images.csv`                        | `augmented/*.png`, `augmented.csv`            |
//! | `train`     | `augmented.csv` or `images.csv`     | `model.ckpt`, `backbone.bin`, `history.csv`, `validation.json` |
//! | `crossval`  | `augmented.csv` or `images.csv`     | `crossval.jsonl`, `crossval_fold<i>.csv`      |
//! | `predict`   | `model.ckpt`, images                | `predictions.txt` (`record_id p_ARR p_NSR p_CHF LABEL`) |
//! | `report`    | `validation.json`, `crossval.jsonl`, `history.csv` | `report.csv`, `curves.csv`     |

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cwt::Wavelet;
use crate::dataset::{
    build_manifest, default_class_map, fix_length, load_record, normalize, read_sidecar_fs, resample, write_record,
    ClassLabel, DatasetManifest, ManifestEntry, Provenance, RecordFormat,
};
use crate::error::{Error, Result};
use crate::evaluate::{
    argmax_class, confusion, cross_validate, kfold_split, mean_log_loss, metrics, ConfusionMatrix, Metrics,
};
use crate::imaging::{
    augment_dataset, read_image, render_scalogram, write_image, AugmentParams, AugmentPolicy, Colormap, RgbImage,
    ScalogramConfig,
};
use crate::io::{derive_seed, write_atomic};
use crate::models::train::stratified_holdout;
use crate::models::{images_tensor, Classifier, EnsembleFoldLearner, History, ModelProfile, TrainConfig};
use crate::synth::{write_dataset, SynthConfig};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const IMAGES_FILE: &str = "images.csv";
pub const AUGMENTED_FILE: &str = "augmented.csv";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const BACKBONE_FILE: &str = "backbone.bin";
pub const HISTORY_FILE: &str = "history.csv";
pub const VALIDATION_FILE: &str = "validation.json";
pub const CROSSVAL_FILE: &str = "crossval.jsonl";
pub const PREDICTIONS_FILE: &str = "predictions.txt";
pub const REPORT_FILE: &str = "report.csv";
pub const CURVES_FILE: &str = "curves.csv";

/// Optional replacements for the profile's default training settings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOverrides {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub augment_policy: Option<AugmentPolicy>,
    pub metrics_every: Option<usize>,
    pub stop_at_train_accuracy: Option<f64>,
    pub validation_fraction: Option<f64>,
}

impl TrainOverrides {
    pub fn apply(&self, base: TrainConfig, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs.unwrap_or(base.epochs),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            learning_rate: self.learning_rate.unwrap_or(base.learning_rate),
            seed,
            augment_policy: self.augment_policy.unwrap_or(base.augment_policy),
            metrics_every: self.metrics_every.unwrap_or(base.metrics_every),
            stop_at_train_accuracy: self.stop_at_train_accuracy.or(base.stop_at_train_accuracy),
            validation_fraction: self.validation_fraction.unwrap_or(base.validation_fraction),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Tree of `<CLASS>/<record>` files read by `prepare` and written by `synth`.
    pub dataset_root: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub k: usize,
    pub profile: ModelProfile,
    /// Sampling rate for records without a `.fs` sidecar.
    pub input_fs: Option<f64>,
    pub target_fs: f64,
    pub length: usize,
    /// Text colormap (256 lines of `r g b`); the built-in jet map when absent.
    pub colormap: Option<PathBuf>,
    /// Frozen-weights file; seeded backbone weights when absent.
    pub backbone: Option<PathBuf>,
    pub scalogram: ScalogramConfig,
    pub augment: AugmentParams,
    pub train: TrainOverrides,
    pub crossval: TrainOverrides,
    pub synth: SynthConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            dataset_root: None,
            output_dir: PathBuf::from("out"),
            seed: 0,
            k: 5,
            profile: ModelProfile::default(),
            input_fs: None,
            target_fs: 128.0,
            length: 65_536,
            colormap: None,
            backbone: None,
            scalogram: ScalogramConfig::default(),
            augment: AugmentParams::default(),
            train: TrainOverrides::default(),
            crossval: TrainOverrides::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Parses TOML; relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.dataset_root.as_mut() {
            fix(p);
        }
        fix(&mut cfg.output_dir);
        if let Some(p) = cfg.colormap.as_mut() {
            fix(p);
        }
        if let Some(p) = cfg.backbone.as_mut() {
            fix(p);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn train_config(&self) -> TrainConfig {
        self.train.apply(TrainConfig::for_profile(self.profile), self.seed)
    }

    pub fn crossval_config(&self) -> TrainConfig {
        self.crossval.apply(TrainConfig::for_crossval(self.profile), self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.k == 0 {
            return bad("k must be >= 1".into());
        }
        if !(self.target_fs > 0.0 && self.target_fs.is_finite()) {
            return bad(format!("target_fs must be positive, got {}", self.target_fs));
        }
        if self.input_fs.is_some_and(|f| !(f > 0.0 && f.is_finite())) {
            return bad("input_fs must be positive".into());
        }
        if self.length < 64 {
            return bad(format!("length must be >= 64, got {}", self.length));
        }
        Wavelet::morlet(self.scalogram.omega0).map_err(|e| Error::Config(e.to_string()))?;
        if self.scalogram.voices == 0 || self.scalogram.min_columns == 0 {
            return bad("scalogram voices and min_columns must be >= 1".into());
        }
        if !(self.augment.rotation_factor >= 0.0 && self.augment.rotation_factor.is_finite()) {
            return bad("augment rotation_factor must be >= 0".into());
        }
        self.train_config().validate()?;
        self.crossval_config().validate()?;
        for p in [&self.colormap, &self.backbone].into_iter().flatten() {
            if !p.is_file() {
                return bad(format!("{} does not exist", p.display()));
            }
        }
        Ok(())
    }

    fn dataset_root(&self) -> Result<&Path> {
        self.dataset_root
            .as_deref()
            .ok_or_else(|| Error::Config("dataset_root is not set".into()))
    }

    fn colormap_table(&self) -> Result<Colormap> {
        match &self.colormap {
            Some(p) => Colormap::load(p),
            None => Ok(Colormap::jet()),
        }
    }

    fn classifier(&self) -> Result<Classifier> {
        let mut c = Classifier::new(
            self.profile,
            derive_seed(self.seed, "backbone", 0),
            derive_seed(self.seed, "head", 0),
        )?;
        if let Some(p) = &self.backbone {
            c.load_backbone_file(p)?;
        }
        Ok(c)
    }
}

/// Per-record problems collected by a command that keeps going past them.
#[derive(Debug, Default)]
pub struct Outcome {
    pub written: usize,
    pub failures: Vec<(String, Error)>,
}

impl Outcome {
    fn finish(self, what: &str) -> Result<usize> {
        if self.failures.is_empty() {
            return Ok(self.written);
        }
        for (id, e) in &self.failures {
            eprintln!("{what}: {id}: {e}");
        }
        Err(Error::Data(format!("{what}: {} record(s) failed", self.failures.len())))
    }
}

pub fn cmd_synth(cfg: &PipelineConfig) -> Result<usize> {
    cfg.synth.validate()?;
    let root = cfg.dataset_root()?;
    Ok(write_dataset(root, &cfg.synth, cfg.seed)?.len())
}

/// Normalizes, resamples and fixes the length of every record under `dataset_root`.
pub fn cmd_prepare(cfg: &PipelineConfig, out: &Path) -> Result<usize> {
    let root = cfg.dataset_root()?;
    if !root.is_dir() {
        return Err(Error::Data(format!("dataset root {} does not exist", root.display())));
    }
    let found = build_manifest(root, &default_class_map())?;
    let results: Vec<Result<ManifestEntry>> = found
        .entries
        .par_iter()
        .map(|e| {
            let path = root.join(&e.path);
            let format = RecordFormat::from_path(&path).expect("manifest lists known formats");
            let fs_hz = match read_sidecar_fs(&path)? {
                Some(f) => f,
                None => cfg.input_fs.ok_or_else(|| {
                    Error::Data(format!("{}: no sampling rate sidecar and no input_fs", path.display()))
                })?,
            };
            let s = load_record(&path, format, fs_hz)?;
            let s = fix_length(&resample(&normalize(&s), cfg.target_fs)?, cfg.length);
            let rel = PathBuf::from("signals").join(format!("{}.f64", e.record_id));
            write_record(&out.join(&rel), &s, RecordFormat::RawBinaryF64)?;
            Ok(ManifestEntry { path: rel, ..e.clone() })
        })
        .collect();
    let mut outcome = Outcome::default();
    let mut entries = Vec::new();
    for (e, r) in found.entries.iter().zip(results) {
        match r {
            Ok(entry) => entries.push(entry),
            Err(err) => outcome.failures.push((e.record_id.clone(), err)),
        }
    }
    outcome.written = entries.len();
    DatasetManifest::new(entries)?.write(&out.join(MANIFEST_FILE))?;
    outcome.finish("prepare")
}

/// Renders one scalogram PNG per prepared record.
pub fn cmd_transform(cfg: &PipelineConfig, out: &Path) -> Result<usize> {
    let manifest = DatasetManifest::read(&out.join(MANIFEST_FILE))?;
    let cm = cfg.colormap_table()?;
    let mut outcome = Outcome::default();
    let mut entries = Vec::new();
    for e in &manifest.entries {
        let render = || -> Result<ManifestEntry> {
            let s = load_record(&out.join(&e.path), RecordFormat::RawBinaryF64, cfg.target_fs)?;
            let img = render_scalogram(&s, &cfg.scalogram, &cm)?;
            let rel = PathBuf::from("images").join(format!("{}.png", e.record_id));
            write_image(&out.join(&rel), &img)?;
            Ok(ManifestEntry { path: rel, ..e.clone() })
        };
        match render() {
            Ok(entry) => entries.push(entry),
            Err(err) => outcome.failures.push((e.record_id.clone(), err)),
        }
    }
    outcome.written = entries.len();
    DatasetManifest::new(entries)?.write(&out.join(IMAGES_FILE))?;
    outcome.finish("transform")
}

pub fn cmd_augment(cfg: &PipelineConfig, out: &Path) -> Result<usize> {
    let manifest = DatasetManifest::read(&out.join(IMAGES_FILE))?;
    let augmented = augment_dataset(&manifest, out, &cfg.augment, cfg.seed)?;
    augmented.write(&out.join(AUGMENTED_FILE))?;
    Ok(augmented.len())
}

/// The augmented manifest when present, else the plain image manifest.
pub fn image_manifest(out: &Path) -> Result<DatasetManifest> {
    let aug = out.join(AUGMENTED_FILE);
    if aug.is_file() {
        DatasetManifest::read(&aug)
    } else {
        DatasetManifest::read(&out.join(IMAGES_FILE))
    }
}

/// Decodes every image of `manifest` in manifest order.
pub fn load_images(manifest: &DatasetManifest, base: &Path) -> Result<Vec<RgbImage>> {
    manifest
        .entries
        .par_iter()
        .map(|e| read_image(&base.join(&e.path)))
        .collect()
}

/// Maps augmented entries onto the originals they were derived from. Returns the
/// original row indices and, per original, its augmented rows.
pub fn originals_and_copies(manifest: &DatasetManifest) -> Result<(Vec<usize>, Vec<Vec<usize>>)> {
    let mut originals = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (row, e) in manifest.entries.iter().enumerate() {
        if e.provenance == Provenance::Original {
            index.insert(&e.record_id, originals.len());
            originals.push(row);
        }
    }
    let mut copies = vec![Vec::new(); originals.len()];
    for (row, e) in manifest.entries.iter().enumerate() {
        if e.provenance == Provenance::Augmented {
            let &o = index
                .get(e.source_id())
                .ok_or_else(|| Error::Data(format!("augmented entry `{}` has no original", e.record_id)))?;
            copies[o].push(row);
        }
    }
    Ok((originals, copies))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub split: String,
    pub samples: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub precision: [f64; 3],
    pub recall: [f64; 3],
    pub confusion: [[u64; 3]; 3],
    pub flags: Vec<String>,
}

impl Evaluation {
    fn new(split: &str, samples: usize, loss: f64, m: &Metrics, cm: &ConfusionMatrix) -> Self {
        Evaluation {
            split: split.into(),
            samples,
            loss,
            accuracy: m.accuracy,
            macro_precision: m.macro_precision,
            macro_recall: m.macro_recall,
            precision: m.precision,
            recall: m.recall,
            confusion: cm.counts,
            flags: m.flags.clone(),
        }
    }
}

pub fn cmd_train(cfg: &PipelineConfig, out: &Path) -> Result<History> {
    let tc = cfg.train_config();
    let manifest = image_manifest(out)?;
    let labels = manifest.labels();
    let (train, val) = match tc.augment_policy {
        AugmentPolicy::BeforeSplit => {
            stratified_holdout(&labels, tc.validation_fraction, derive_seed(cfg.seed, "holdout", 0))
        }
        AugmentPolicy::TrainOnly => {
            let (originals, copies) = originals_and_copies(&manifest)?;
            let orig_labels: Vec<ClassLabel> = originals.iter().map(|&r| labels[r]).collect();
            let (t, v) = stratified_holdout(
                &orig_labels,
                tc.validation_fraction,
                derive_seed(cfg.seed, "holdout", 0),
            );
            let mut train: Vec<usize> = t
                .iter()
                .flat_map(|&i| std::iter::once(originals[i]).chain(copies[i].iter().copied()))
                .collect();
            train.sort_unstable();
            (train, v.iter().map(|&i| originals[i]).collect())
        }
    };
    let imgs = load_images(&manifest, out)?;
    let mut clf = cfg.classifier()?;
    let history = clf.train_split(&imgs, &labels, &train, &val, &tc)?;

    let (split, rows) = if val.is_empty() {
        ("train", &train)
    } else {
        ("validation", &val)
    };
    let subset: Vec<RgbImage> = rows.iter().map(|&r| imgs[r].clone()).collect();
    let truth: Vec<ClassLabel> = rows.iter().map(|&r| labels[r]).collect();
    let probs = clf.predict_tensor(&images_tensor(&subset))?;
    let preds: Vec<ClassLabel> = probs.iter().map(argmax_class).collect();
    let cm = confusion(&preds, &truth)?;
    let eval = Evaluation::new(split, rows.len(), mean_log_loss(&probs, &truth)?, &metrics(&cm)?, &cm);

    clf.save(&out.join(CHECKPOINT_FILE))?;
    clf.save_backbone(&out.join(BACKBONE_FILE))?;
    write_atomic(&out.join(HISTORY_FILE), history.to_csv().as_bytes())?;
    let json = serde_json::to_string_pretty(&eval).expect("serializable") + "\n";
    write_atomic(&out.join(VALIDATION_FILE), json.as_bytes())?;
    Ok(history)
}

pub fn cmd_crossval(cfg: &PipelineConfig, out: &Path) -> Result<crate::evaluate::CrossValReport> {
    let tc = cfg.crossval_config();
    let manifest = image_manifest(out)?;
    let labels = manifest.labels();
    let (rows, extra) = match tc.augment_policy {
        AugmentPolicy::BeforeSplit => ((0..manifest.len()).collect(), vec![Vec::new(); manifest.len()]),
        AugmentPolicy::TrainOnly => originals_and_copies(&manifest)?,
    };
    let sample_labels: Vec<ClassLabel> = rows.iter().map(|&r| labels[r]).collect();
    let plan = kfold_split(&sample_labels, cfg.k, derive_seed(cfg.seed, "folds", 0))?;
    let x = images_tensor(&load_images(&manifest, out)?);
    let mut learner = EnsembleFoldLearner::new(cfg.classifier()?, &x, &labels, rows, extra, tc)?;
    drop(x);
    let report = cross_validate(&plan, &sample_labels, &mut learner)?;
    for (i, h) in learner.histories.iter().enumerate() {
        write_atomic(&out.join(format!("crossval_fold{i}.csv")), h.to_csv().as_bytes())?;
    }
    write_atomic(&out.join(CROSSVAL_FILE), report.to_lines().as_bytes())?;
    Ok(report)
}

/// `record_id p_ARR p_NSR p_CHF LABEL`, one line per image.
pub fn cmd_predict(cfg: &PipelineConfig, out: &Path, checkpoint: Option<&Path>, images: &[PathBuf]) -> Result<String> {
    let ckpt = checkpoint
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out.join(CHECKPOINT_FILE));
    let mut clf = Classifier::load(cfg.profile, &ckpt)?;
    let (ids, paths): (Vec<String>, Vec<PathBuf>) = if images.is_empty() {
        DatasetManifest::read(&out.join(IMAGES_FILE))?
            .entries
            .into_iter()
            .map(|e| (e.record_id, out.join(e.path)))
            .unzip()
    } else {
        images
            .iter()
            .map(|p| {
                let id = p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                (id, p.clone())
            })
            .unzip()
    };
    let imgs: Vec<RgbImage> = paths.par_iter().map(|p| read_image(p)).collect::<Result<_>>()?;
    let probs = clf.predict_batch(&imgs)?;
    let mut text = String::new();
    for (id, p) in ids.iter().zip(&probs) {
        let [a, b, c] = p.values();
        text.push_str(&format!("{id} {a:.6} {b:.6} {c:.6} {}\n", argmax_class(p)));
    }
    write_atomic(&out.join(PREDICTIONS_FILE), text.as_bytes())?;
    Ok(text)
}

/// Summary table with the columns `source,Loss,Accuracy,Precision,Recall` (macro
/// precision and recall) plus `curves.csv` for plotting the training history.
pub fn cmd_report(out: &Path) -> Result<String> {
    let mut table = String::from("source,Loss,Accuracy,Precision,Recall\n");
    let mut any = false;
    let val_path = out.join(VALIDATION_FILE);
    if val_path.is_file() {
        let text = fs::read_to_string(&val_path).map_err(|e| Error::io(&val_path, e))?;
        let e: Evaluation =
            serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", val_path.display())))?;
        table.push_str(&format!(
            "{},{},{},{},{}\n",
            e.split, e.loss, e.accuracy, e.macro_precision, e.macro_recall
        ));
        any = true;
    }
    let cv_path = out.join(CROSSVAL_FILE);
    if cv_path.is_file() {
        let text = fs::read_to_string(&cv_path).map_err(|e| Error::io(&cv_path, e))?;
        let agg = text
            .lines()
            .filter_map(|l| serde_json::from_str::<serde_json::Value>(l).ok())
            .find(|v| v["record"] == "aggregate")
            .ok_or_else(|| Error::Data(format!("{}: no aggregate record", cv_path.display())))?;
        for stat in ["mean", "std"] {
            let g = |k: &str| agg[k][stat].as_f64().unwrap_or(f64::NAN);
            table.push_str(&format!(
                "crossval_{stat},{},{},{},{}\n",
                g("loss"),
                g("accuracy"),
                g("macro_precision"),
                g("macro_recall")
            ));
        }
        any = true;
    }
    if !any {
        return Err(Error::Data(format!(
            "nothing to report in {}: run train or crossval first",
            out.display()
        )));
    }
    let hist_path = out.join(HISTORY_FILE);
    if hist_path.is_file() {
        let text = fs::read_to_string(&hist_path).map_err(|e| Error::io(&hist_path, e))?;
        write_atomic(&out.join(CURVES_FILE), History::from_csv(&text)?.to_csv().as_bytes())?;
    }
    write_atomic(&out.join(REPORT_FILE), table.as_bytes())?;
    Ok(table)
}

#[derive(Debug, Parser)]
#[command(name = "ecgscalo", version, about = "ECG scalogram classification pipeline")]
pub struct Cli {
    /// Pipeline configuration (TOML); built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the synthetic three-class dataset to the dataset root.
    Synth {
        #[arg(long)]
        root: Option<PathBuf>,
    },
    /// Load, normalize, resample and length-fix the raw recordings.
    Prepare {
        #[arg(long)]
        root: Option<PathBuf>,
    },
    /// Render scalogram images.
    Transform,
    /// Add flipped and rotated copies.
    Augment,
    /// Train with a stratified validation split.
    Train,
    /// Stratified k-fold cross-validation.
    Crossval,
    /// Classify images (defaults to every transformed image).
    Predict {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        images: Vec<PathBuf>,
    },
    /// Summarize validation and cross-validation metrics.
    Report,
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.output_dir = o;
    }
    if let Command::Synth { root: Some(r) } | Command::Prepare { root: Some(r) } = &cli.command {
        cfg.dataset_root = Some(r.clone());
    }
    cfg.validate()?;
    let out = cfg.output_dir.clone();
    match cli.command {
        Command::Synth { .. } => {
            let n = cmd_synth(&cfg)?;
            println!("synth: wrote {n} records to {}", cfg.dataset_root()?.display());
        }
        Command::Prepare { .. } => println!("prepare: {} records", cmd_prepare(&cfg, &out)?),
        Command::Transform => println!("transform: {} images", cmd_transform(&cfg, &out)?),
        Command::Augment => println!("augment: {} manifest entries", cmd_augment(&cfg, &out)?),
        Command::Train => {
            let h = cmd_train(&cfg, &out)?;
            if let Some(r) = h.last() {
                println!(
                    "train: epoch {} train_loss {:.6} train_acc {:.4}",
                    r.epoch, r.train_loss, r.train_acc
                );
            }
        }
        Command::Crossval => print!("{}", cmd_crossval(&cfg, &out)?.to_lines()),
        Command::Predict { checkpoint, images } => {
            print!("{}", cmd_predict(&cfg, &out, checkpoint.as_deref(), &images)?)
        }
        Command::Report => print!("{}", cmd_report(&out)?),
    }
    Ok(())
}
