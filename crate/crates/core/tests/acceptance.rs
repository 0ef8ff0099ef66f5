//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use common::{all_layer_errors, brute_counts, random_labels, run_synthetic_pipeline, synth_config, toy_images};
use ecgscalo::cli::CROSSVAL_FILE;
use ecgscalo::cwt::{cwt_direct, cwt_fast, default_scales, CwtOptions, ScaleGrid, ScaleNorm, Wavelet};
use ecgscalo::dataset::{ClassLabel, DatasetManifest, ManifestEntry, Provenance, Signal};
use ecgscalo::evaluate::{argmax_class, confusion, ensemble_average, kfold_split, metrics, ProbVector};
use ecgscalo::imaging::{augment_dataset, write_image, AugmentParams, RgbImage};
use ecgscalo::models::{Classifier, ModelProfile, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_signal(n: usize, rng: &mut ChaCha8Rng) -> Signal {
    Signal::new("r", (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(), 128.0).unwrap()
}

fn c1_cwt_oracle() -> Outcome {
    let t = Instant::now();
    let grid = ScaleGrid::geometric(2.0, 24, 12).unwrap();
    let margin = (4.0 * grid.max_scale()).ceil() as usize;
    let w = Wavelet::morlet(6.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let s = random_signal(256, &mut rng);
        let fast = cwt_fast(&s, &grid, &CwtOptions::default()).unwrap();
        let direct = cwt_direct(&s, &grid, &w, ScaleNorm::L1).unwrap();
        let (mut num, mut den) = (0.0, 0.0);
        for r in 0..grid.len() {
            for c in margin..256 - margin {
                num += (fast.get(r, c) - direct.get(r, c)).norm_sqr();
                den += direct.get(r, c).norm_sqr();
            }
        }
        worst = worst.max((num / den).sqrt());
    }
    let secs = t.elapsed().as_secs_f64();
    check(
        worst < 1e-6 && secs < 60.0,
        format!("max relative Frobenius error {worst:.2e} over 20 signals, {secs:.2} s"),
    )
}

fn c2_scale_frequency() -> Outcome {
    let (fs, n) = (128.0, 4096);
    let grid = default_scales(n, fs, 12).unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    for f0 in [4.0, 8.0, 16.0] {
        let samples = (0..n)
            .map(|i| (std::f64::consts::TAU * f0 * i as f64 / fs).sin())
            .collect();
        let c = cwt_fast(
            &Signal::new("sine", samples, fs).unwrap(),
            &grid,
            &CwtOptions::default(),
        )
        .unwrap();
        let energy = |r: usize| (n / 4..3 * n / 4).map(|col| c.get(r, col).norm()).sum::<f64>();
        let peak = (0..grid.len())
            .max_by(|&a, &b| energy(a).total_cmp(&energy(b)))
            .unwrap();
        let expected = 6.0 * fs / (std::f64::consts::TAU * f0);
        let voices = (grid.scales()[peak] / expected).log2().abs() * 12.0;
        ok &= voices <= 1.0;
        parts.push(format!("{f0} Hz off by {voices:.2} voices"));
    }
    check(ok, parts.join(", "))
}

fn c3_gradients() -> Outcome {
    let e64 = all_layer_errors::<f64>(11);
    let e32 = all_layer_errors::<f32>(12);
    fn worst(e: &[(&'static str, f64)]) -> (&'static str, f64) {
        e.iter().copied().fold(("", 0.0), |a, b| if b.1 > a.1 { b } else { a })
    }
    let (n64, w64) = worst(&e64);
    let (n32, w32) = worst(&e32);
    check(
        w64 < 1e-6 && w32 < 1e-3,
        format!(
            "{} layers; worst f64 {w64:.2e} ({n64}), worst f32 {w32:.2e} ({n32})",
            e64.len()
        ),
    )
}

/// Trains the custom CNN on the toy set; returns the encoded checkpoint.
fn overfit_run() -> (Result<String, String>, Vec<u8>) {
    let t = Instant::now();
    let (imgs, labels) = toy_images(4);
    let cfg = TrainConfig {
        learning_rate: 1e-3,
        seed: 4,
        validation_fraction: 0.0,
        stop_at_train_accuracy: Some(1.0),
        ..TrainConfig::for_profile(ModelProfile::CustomCnn)
    };
    let mut clf = Classifier::new(ModelProfile::CustomCnn, 4, 4).unwrap();
    let history = clf.train(&imgs, &labels, &cfg).unwrap();
    let preds = clf.predict_batch(&imgs).unwrap();
    let correct = preds
        .iter()
        .zip(&labels)
        .filter(|(p, l)| argmax_class(p) == **l)
        .count();
    let secs = t.elapsed().as_secs_f64();
    let epochs = history.last().map_or(0, |r| r.epoch);
    let outcome = check(
        correct == 12 && epochs <= 200 && secs < 120.0,
        format!("{correct}/12 correct after {epochs} epochs, {secs:.1} s"),
    );
    (outcome, clf.to_checkpoint().encode())
}

fn pipeline_run(dir: &Path) -> (Outcome, Vec<u8>) {
    let t = Instant::now();
    let cfg = synth_config(dir, 21);
    let report = run_synthetic_pipeline(&cfg);
    let secs = t.elapsed().as_secs_f64();
    let acc = report.aggregate.accuracy;
    let outcome = check(
        acc.mean >= 0.95 && secs < 15.0 * 60.0,
        format!(
            "mean accuracy {:.4} (std {:.4}), pooled confusion {:?}, {secs:.0} s",
            acc.mean, acc.std, report.aggregate.pooled_confusion.counts
        ),
    );
    let mut bytes = fs::read(cfg.output_dir.join(CROSSVAL_FILE)).unwrap();
    for i in 0..5 {
        bytes.extend(fs::read(cfg.output_dir.join(format!("crossval_fold{i}.csv"))).unwrap());
    }
    (outcome, bytes)
}

fn c6_augment_count() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let counts = [96, 30, 36];
    let mut entries = Vec::new();
    for (class, &n) in ClassLabel::ALL.iter().zip(&counts) {
        for i in 0..n {
            let id = format!("{}_{i:03}", class.name());
            let path = Path::new("images").join(format!("{id}.png"));
            let shade = (i * 2) as u8;
            write_image(&dir.path().join(&path), &RgbImage::from_fn(|y, _| [shade, y as u8, 0])).unwrap();
            entries.push(ManifestEntry {
                record_id: id,
                path,
                label: *class,
                provenance: Provenance::Original,
            });
        }
    }
    let manifest = DatasetManifest::new(entries).unwrap();
    let params = AugmentParams {
        copies: 2,
        ..AugmentParams::default()
    };
    let out = augment_dataset(&manifest, dir.path(), &params, 6).unwrap();
    let augmented = out
        .entries
        .iter()
        .filter(|e| e.provenance == Provenance::Augmented)
        .count();
    check(
        manifest.len() == 162 && out.len() == 486 && augmented == 324 && out.counts() == [288, 90, 108],
        format!(
            "{} -> {} entries ({augmented} augmented), counts {:?}",
            manifest.len(),
            out.len(),
            out.counts()
        ),
    )
}

fn c7_fold_plan() -> Outcome {
    let labels: Vec<ClassLabel> = ClassLabel::ALL
        .iter()
        .zip([96, 30, 36])
        .flat_map(|(&c, n)| std::iter::repeat_n(c, n))
        .collect();
    let plan = kfold_split(&labels, 5, 7).unwrap();
    let mut sizes: Vec<usize> = plan.folds.iter().map(Vec::len).collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    let mut seen = vec![0usize; labels.len()];
    plan.folds.iter().flatten().for_each(|&i| seen[i] += 1);
    let exact_cover = seen.iter().all(|&s| s == 1);
    let spread = (0..3)
        .map(|c| {
            let per: Vec<usize> = plan
                .folds
                .iter()
                .map(|f| f.iter().filter(|&&i| labels[i].index() == c).count())
                .collect();
            per.iter().max().unwrap() - per.iter().min().unwrap()
        })
        .max()
        .unwrap();
    check(
        sizes == [33, 33, 32, 32, 32] && exact_cover && spread <= 1,
        format!("sizes {sizes:?}, disjoint and exhaustive: {exact_cover}, per-class spread {spread}"),
    )
}

fn c8_metric_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for case in 0..100 {
        let x = random_labels(rng.gen_range(1..=200), &mut rng);
        let m = metrics(&confusion(&x, &x).unwrap()).unwrap();
        let present: Vec<bool> = (0..3).map(|c| x.iter().any(|l| l.index() == c)).collect();
        let per_class_ok = (0..3).all(|c| !present[c] || (m.precision[c] == 1.0 && m.recall[c] == 1.0));
        if m.accuracy != 1.0 || m.micro_precision != 1.0 || m.micro_recall != 1.0 || !per_class_ok {
            return Err(format!("identity case {case}: {m:?}"));
        }
    }
    for case in 0..100 {
        let n = rng.gen_range(1..=200);
        let truth = random_labels(n, &mut rng);
        let preds = random_labels(n, &mut rng);
        let m = metrics(&confusion(&preds, &truth).unwrap()).unwrap();
        let counts = brute_counts(&preds, &truth);
        let correct = preds.iter().zip(&truth).filter(|(p, t)| p == t).count();
        for (c, &(tp, fp, fn_)) in counts.iter().enumerate() {
            let p = if tp + fp == 0 {
                0.0
            } else {
                tp as f64 / (tp + fp) as f64
            };
            let r = if tp + fn_ == 0 {
                0.0
            } else {
                tp as f64 / (tp + fn_) as f64
            };
            if m.precision[c] != p || m.recall[c] != r {
                return Err(format!(
                    "random case {case}, class {c}: {m:?} vs tp {tp} fp {fp} fn {fn_}"
                ));
            }
        }
        if m.accuracy != correct as f64 / n as f64 {
            return Err(format!("random case {case}: accuracy {}", m.accuracy));
        }
    }
    Ok("100 identity cases and 100 random cases match the brute-force counter exactly".into())
}

#[allow(clippy::needless_range_loop)]
fn c9_ensemble_permutations() -> Outcome {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let triple: Vec<ProbVector> = (0..3)
            .map(|_| {
                let raw: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0f64) + 1e-9).collect();
                let s: f64 = raw.iter().sum();
                ProbVector::from_slice(&raw.iter().map(|v| v / s).collect::<Vec<_>>()).unwrap()
            })
            .collect();
        let brute: Vec<f64> = (0..3)
            .map(|k| triple.iter().map(|p| p.0[k]).sum::<f64>() / 3.0)
            .collect();
        let base = ensemble_average(&triple).unwrap();
        for perm in PERMS {
            let permuted: Vec<ProbVector> = perm.iter().map(|&i| triple[i]).collect();
            let avg = ensemble_average(&permuted).unwrap();
            if argmax_class(&avg) != argmax_class(&base) {
                return Err(format!("case {case}: argmax changed under {perm:?}"));
            }
            for k in 0..3 {
                worst = worst.max((avg.0[k] - base.0[k]).abs()).max((avg.0[k] - brute[k]).abs());
            }
        }
    }
    check(
        worst < 1e-12,
        format!("1000 triples x 6 orders, max deviation {worst:.1e}"),
    )
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    })
}

fn main() {
    let start = Instant::now();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |n: u32, name: &'static str, r: Outcome| {
        let (tag, detail) = match &r {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("criterion {n:>2} {tag} {name}: {detail}");
        results.push((n, name, r));
    };

    report(1, "cwt fast vs direct", guarded(c1_cwt_oracle));
    report(2, "scale-frequency law", guarded(c2_scale_frequency));
    report(3, "gradient checks", guarded(c3_gradients));

    let mut overfit_bytes = Vec::new();
    report(
        4,
        "overfit toy set",
        guarded(|| {
            let (o, b) = overfit_run();
            overfit_bytes = b;
            o
        }),
    );

    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut pipeline_bytes = Vec::new();
    report(
        5,
        "synthetic end-to-end crossval",
        guarded(|| {
            let (o, b) = pipeline_run(dirs[0].path());
            pipeline_bytes = b;
            o
        }),
    );

    report(6, "augmentation count", guarded(c6_augment_count));
    report(7, "fold plan", guarded(c7_fold_plan));
    report(8, "metric identities", guarded(c8_metric_identities));
    report(9, "ensemble permutation invariance", guarded(c9_ensemble_permutations));

    report(
        10,
        "determinism",
        guarded(|| {
            let (_, again) = overfit_run();
            let ckpt_same = !overfit_bytes.is_empty() && again == overfit_bytes;
            let (_, again) = pipeline_run(dirs[1].path());
            let report_same = !pipeline_bytes.is_empty() && again == pipeline_bytes;
            check(
                ckpt_same && report_same,
                format!(
                "checkpoint identical: {ckpt_same} ({} bytes), crossval reports identical: {report_same} ({} bytes)",
                overfit_bytes.len(),
                pipeline_bytes.len()
            ),
            )
        }),
    );

    let failed: Vec<u32> = results.iter().filter(|r| r.2.is_err()).map(|r| r.0).collect();
    let total = Duration::from_secs(start.elapsed().as_secs());
    println!(
        "acceptance: {}/{} passed in {total:?}",
        results.len() - failed.len(),
        results.len()
    );
    if !failed.is_empty() {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
