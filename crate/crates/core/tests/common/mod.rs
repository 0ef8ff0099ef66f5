//! Oracles shared by the integration tests.
#![allow(dead_code)]

use std::path::Path;

use ecgscalo::cli::{cmd_augment, cmd_crossval, cmd_prepare, cmd_synth, cmd_transform, PipelineConfig, TrainOverrides};
use ecgscalo::dataset::ClassLabel;
use ecgscalo::evaluate::CrossValReport;
use ecgscalo::imaging::RgbImage;
use ecgscalo::nn::{
    cross_entropy, BatchNorm, Conv2d, Dense, Dropout, Flatten, GlobalAvgPool, Layer, MaxPool, Mode, Network, Padding,
    Real, Relu, Rescale, Slot, Softmax, Tensor,
};
use ecgscalo::synth::SynthConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seed of the RNG handed to every forward pass of the oracle, so dropout masks repeat.
const FORWARD_SEED: u64 = 99;

/// Elementwise relative error `|a - n| / max(|a|, |n|, floor)`.
pub fn rel_err(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

pub fn random_tensor<T: Real>(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<T> {
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| T::of(rng.gen_range(-1.0..1.0))).collect()).unwrap()
}

/// Values with magnitude in [0.1, 1], so a small perturbation never crosses zero.
pub fn away_from_zero<T: Real>(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<T> {
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = rng.gen_range(0.1..1.0);
            T::of(if rng.gen_bool(0.5) { m } else { -m })
        })
        .collect();
    Tensor::from_vec(shape, data).unwrap()
}

/// Distinct values spaced 0.05 apart in random order, so no pooling window has near ties.
pub fn spaced<T: Real>(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<T> {
    let n: usize = shape.iter().product();
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        idx.swap(i, rng.gen_range(0..=i));
    }
    Tensor::from_vec(shape, idx.iter().map(|&i| T::of(i as f64 * 0.05 - 1.0)).collect()).unwrap()
}

fn project<T: Real>(y: &Tensor<T>, r: &[f64]) -> f64 {
    y.data().iter().zip(r).map(|(v, w)| v.as_f64() * w).sum()
}

fn objective<T: Real>(layer: &Layer<T>, x: &Tensor<T>, mode: Mode, r: &[f64]) -> f64 {
    let mut l = layer.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(FORWARD_SEED);
    project(&l.forward(x, mode, &mut rng).unwrap(), r)
}

fn central<T: Real>(v: T, eps: f64, mut eval: impl FnMut(T) -> f64) -> f64 {
    let hi = v + T::of(eps);
    let lo = v - T::of(eps);
    (eval(hi) - eval(lo)) / (hi - lo).as_f64()
}

/// Copies of `layer`'s parameters into an f64 layer of the same kind.
pub fn widen<T: Real>(layer: &Layer<T>, like: &Layer<f64>) -> Layer<f64> {
    let mut out = like.clone();
    for (dst, src) in out.params_mut().into_iter().zip(layer.params()) {
        dst.value = src.value.cast();
    }
    out
}

/// Largest relative error between `backward` of `layer` and central differences of
/// the scalar `sum(r * forward(x))`, over the input and every parameter entry. The
/// differences are taken on `oracle`, an f64 layer holding the same parameters, so
/// they carry no 32-bit rounding noise.
pub fn layer_grad_error<T: Real>(
    layer: &Layer<T>,
    x: &Tensor<T>,
    oracle: &Layer<f64>,
    mode: Mode,
    eps: f64,
    floor: f64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut probe = layer.clone();
    let mut frng = ChaCha8Rng::seed_from_u64(FORWARD_SEED);
    let y = probe.forward(x, mode, &mut frng).unwrap();
    let g = Tensor::from_vec(
        y.shape(),
        (0..y.len()).map(|_| T::of(rng.gen_range(-1.0..1.0))).collect(),
    )
    .unwrap();
    let r: Vec<f64> = g.data().iter().map(|v| v.as_f64()).collect();
    let gx = probe.backward(&g, true).unwrap();
    let x64: Tensor<f64> = x.cast();

    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let n = central(x64.data()[i], eps, |v| {
            let mut xp = x64.clone();
            xp.data_mut()[i] = v;
            objective(oracle, &xp, mode, &r)
        });
        worst = worst.max(rel_err(gx.data()[i].as_f64(), n, floor));
    }
    for (pi, p) in probe.params().iter().enumerate() {
        for j in 0..p.value.len() {
            let v0 = oracle.params()[pi].value.data()[j];
            let n = central(v0, eps, |v| {
                let mut l = oracle.clone();
                l.params_mut()[pi].value.data_mut()[j] = v;
                objective(&l, &x64, mode, &r)
            });
            worst = worst.max(rel_err(p.grad.data()[j].as_f64(), n, floor));
        }
    }
    worst
}

/// Gradient of the mean cross entropy w.r.t. every parameter and the input of a
/// whole network, against central differences of the loss of its f64 twin.
pub fn network_grad_error<T: Real>(
    net: &Network<T>,
    x: &Tensor<T>,
    labels: &[usize],
    like: &Network<f64>,
    eps: f64,
    floor: f64,
) -> f64 {
    let mut oracle = like.clone();
    for (dst, src) in oracle.slots.iter_mut().zip(&net.slots) {
        dst.layer = widen(&src.layer, &dst.layer);
    }
    let loss = |n: &Network<f64>, x: &Tensor<f64>| {
        let mut n = n.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(FORWARD_SEED);
        cross_entropy(&n.forward(x, Mode::Train, &mut rng).unwrap(), labels).unwrap()
    };
    let mut probe = net.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(FORWARD_SEED);
    let p = probe.forward(x, Mode::Train, &mut rng).unwrap();
    let g = ecgscalo::nn::softmax_cross_entropy_backward(&p, labels).unwrap();
    let gx = probe.backward_logits(&g, 0, true).unwrap();
    let x64: Tensor<f64> = x.cast();

    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let n = central(x64.data()[i], eps, |v| {
            let mut xp = x64.clone();
            xp.data_mut()[i] = v;
            loss(&oracle, &xp)
        });
        worst = worst.max(rel_err(gx.data()[i].as_f64(), n, floor));
    }
    for (si, slot) in probe.slots.iter().enumerate() {
        for (pi, p) in slot.layer.params().iter().enumerate() {
            for j in 0..p.value.len() {
                let v0 = oracle.slots[si].layer.params()[pi].value.data()[j];
                let n = central(v0, eps, |v| {
                    let mut m = oracle.clone();
                    m.slots[si].layer.params_mut()[pi].value.data_mut()[j] = v;
                    loss(&m, &x64)
                });
                worst = worst.max(rel_err(p.grad.data()[j].as_f64(), n, floor));
            }
        }
    }
    worst
}

/// Worst error over every layer kind at precision `T`, per layer name.
pub fn all_layer_errors<T: Real>(seed: u64) -> Vec<(&'static str, f64)> {
    layer_cases::<T>(seed)
        .into_iter()
        .zip(layer_cases::<f64>(seed))
        .map(|((name, layer, x, mode), (_, like, _, _))| {
            let oracle = widen(&layer, &like);
            (name, layer_grad_error(&layer, &x, &oracle, mode, GRAD_EPS, GRAD_FLOOR))
        })
        .collect()
}

/// Step of the central differences (taken in f64).
pub const GRAD_EPS: f64 = 1e-5;
/// Gradients below this magnitude are compared absolutely.
pub const GRAD_FLOOR: f64 = 1e-3;

/// Every layer kind with an input that keeps central differences away from kinks.
pub fn layer_cases<T: Real>(seed: u64) -> Vec<(&'static str, Layer<T>, Tensor<T>, Mode)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bn = BatchNorm::<T>::new(3);
    for (i, g) in bn.gamma.value.data_mut().iter_mut().enumerate() {
        *g = T::of(0.5 + 0.4 * i as f64);
    }
    for (i, b) in bn.beta.value.data_mut().iter_mut().enumerate() {
        *b = T::of(0.3 * i as f64 - 0.2);
    }
    vec![
        (
            "conv_same",
            Layer::Conv2d(Conv2d::new(3, 3, 2, 4, 1, Padding::Same, &mut rng)),
            random_tensor(&[1, 8, 8, 2], &mut rng),
            Mode::Train,
        ),
        (
            "conv_valid_stride2",
            Layer::Conv2d(Conv2d::new(3, 3, 3, 2, 2, Padding::Valid, &mut rng)),
            random_tensor(&[2, 7, 7, 3], &mut rng),
            Mode::Train,
        ),
        (
            "batchnorm_train",
            Layer::BatchNorm(bn),
            random_tensor(&[4, 3, 3, 3], &mut rng),
            Mode::Train,
        ),
        (
            "relu",
            Layer::Relu(Relu::new()),
            away_from_zero(&[2, 4, 4, 3], &mut rng),
            Mode::Train,
        ),
        (
            "dropout",
            Layer::Dropout(Dropout::new(0.5).unwrap()),
            random_tensor(&[2, 4, 4, 3], &mut rng),
            Mode::Train,
        ),
        (
            "maxpool",
            Layer::MaxPool(MaxPool::new(2, 2)),
            spaced(&[2, 8, 8, 3], &mut rng),
            Mode::Train,
        ),
        (
            "global_avg_pool",
            Layer::GlobalAvgPool(GlobalAvgPool::default()),
            random_tensor(&[2, 8, 8, 3], &mut rng),
            Mode::Train,
        ),
        (
            "flatten",
            Layer::Flatten(Flatten::default()),
            random_tensor(&[2, 3, 3, 2], &mut rng),
            Mode::Train,
        ),
        (
            "dense",
            Layer::Dense(Dense::new(5, 4, &mut rng)),
            random_tensor(&[3, 5], &mut rng),
            Mode::Train,
        ),
        (
            "softmax",
            Layer::Softmax(Softmax::new()),
            random_tensor(&[3, 4], &mut rng),
            Mode::Train,
        ),
        (
            "rescale",
            Layer::Rescale(Rescale {
                scale: 2.0,
                offset: -1.0,
            }),
            random_tensor(&[1, 4, 4, 3], &mut rng),
            Mode::Train,
        ),
    ]
}

/// conv -> batchnorm -> relu -> dropout -> maxpool -> flatten -> dense -> softmax on 8x8 inputs.
pub fn small_network<T: Real>(seed: u64) -> Network<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slot = |name: &str, layer| Slot {
        name: name.into(),
        frozen: false,
        layer,
    };
    Network::new(vec![
        slot(
            "conv",
            Layer::Conv2d(Conv2d::new(3, 3, 2, 3, 1, Padding::Same, &mut rng)),
        ),
        slot("bn", Layer::BatchNorm(BatchNorm::new(3))),
        slot("relu", Layer::Relu(Relu::new())),
        slot("dropout", Layer::Dropout(Dropout::new(0.5).unwrap())),
        slot("pool", Layer::MaxPool(MaxPool::new(2, 2))),
        slot("flatten", Layer::Flatten(Flatten::default())),
        slot("dense", Layer::Dense(Dense::new(48, 3, &mut rng))),
        slot("softmax", Layer::Softmax(Softmax::new())),
    ])
    .unwrap()
}

/// Per-class (tp, fp, fn) by scanning every sample.
pub fn brute_counts(preds: &[ClassLabel], truth: &[ClassLabel]) -> [(u64, u64, u64); 3] {
    let mut out = [(0, 0, 0); 3];
    for (c, slot) in out.iter_mut().enumerate() {
        for (p, t) in preds.iter().zip(truth) {
            let (p, t) = (p.index() == c, t.index() == c);
            if p && t {
                slot.0 += 1;
            } else if p {
                slot.1 += 1;
            } else if t {
                slot.2 += 1;
            }
        }
    }
    out
}

pub fn random_labels(n: usize, rng: &mut ChaCha8Rng) -> Vec<ClassLabel> {
    (0..n)
        .map(|_| ClassLabel::from_index(rng.gen_range(0..3)).unwrap())
        .collect()
}

/// Four images per class: a class-coloured square on a noisy grey field, placed at
/// a per-image offset.
pub fn toy_images(seed: u64) -> (Vec<RgbImage>, Vec<ClassLabel>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut imgs = Vec::new();
    let mut labels = Vec::new();
    for class in ClassLabel::ALL {
        for _ in 0..4 {
            let (oy, ox) = (rng.gen_range(20..100), rng.gen_range(20..100));
            let noise: Vec<u8> = (0..224 * 224).map(|_| rng.gen_range(90..130)).collect();
            imgs.push(RgbImage::from_fn(|y, x| {
                if (oy..oy + 100).contains(&y) && (ox..ox + 100).contains(&x) {
                    let mut px = [30, 30, 30];
                    px[class.index()] = 230;
                    px
                } else {
                    let g = noise[y * 224 + x];
                    [g, g, g]
                }
            }));
            labels.push(class);
        }
    }
    (imgs, labels)
}

/// Pipeline configuration used by the end-to-end synthetic run.
pub fn synth_config(root: &Path, seed: u64) -> PipelineConfig {
    PipelineConfig {
        dataset_root: Some(root.join("data")),
        output_dir: root.join("out"),
        seed,
        crossval: TrainOverrides {
            learning_rate: Some(1e-3),
            ..TrainOverrides::default()
        },
        synth: SynthConfig::default(),
        ..PipelineConfig::default()
    }
}

/// synth -> prepare -> transform -> augment -> crossval; returns the report.
pub fn run_synthetic_pipeline(cfg: &PipelineConfig) -> CrossValReport {
    cfg.validate().unwrap();
    let out = &cfg.output_dir;
    assert_eq!(cmd_synth(cfg).unwrap(), 60);
    assert_eq!(cmd_prepare(cfg, out).unwrap(), 60);
    assert_eq!(cmd_transform(cfg, out).unwrap(), 60);
    assert_eq!(cmd_augment(cfg, out).unwrap(), 180);
    cmd_crossval(cfg, out).unwrap()
}
