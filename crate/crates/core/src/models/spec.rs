//! Layer-graph descriptions of the classifier shapes and their instantiation.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::IMAGE_SIZE;
use crate::io::{derive_seed, fnv1a64};
use crate::nn::{
    BatchNorm, Conv2d, Dense, Dropout, Flatten, GlobalAvgPool, Layer, MaxPool, Network, Padding, Real, Relu, Rescale,
    Slot, Softmax,
};

pub const NUM_CLASSES: usize = 3;
pub const DROPOUT_RATE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub enum LayerKind {
    Conv {
        kernel: usize,
        filters: usize,
        stride: usize,
        same: bool,
    },
    BatchNorm,
    Relu,
    Dropout {
        rate: f64,
    },
    MaxPool {
        window: usize,
        stride: usize,
    },
    GlobalAvgPool,
    Flatten,
    Dense {
        units: usize,
    },
    Softmax,
    Rescale {
        scale: f64,
        offset: f64,
    },
}

impl LayerKind {
    fn canonical(&self) -> String {
        match self {
            LayerKind::Conv {
                kernel,
                filters,
                stride,
                same,
            } => format!(
                "conv k={kernel} f={filters} s={stride} p={}",
                if *same { "same" } else { "valid" }
            ),
            LayerKind::BatchNorm => "batchnorm".into(),
            LayerKind::Relu => "relu".into(),
            LayerKind::Dropout { rate } => format!("dropout r={rate:?}"),
            LayerKind::MaxPool { window, stride } => format!("maxpool w={window} s={stride}"),
            LayerKind::GlobalAvgPool => "gap".into(),
            LayerKind::Flatten => "flatten".into(),
            LayerKind::Dense { units } => format!("dense u={units}"),
            LayerKind::Softmax => "softmax".into(),
            LayerKind::Rescale { scale, offset } => format!("rescale s={scale:?} o={offset:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub frozen: bool,
}

impl LayerSpec {
    fn new(name: impl Into<String>, kind: LayerKind) -> Self {
        LayerSpec {
            name: name.into(),
            kind,
            frozen: false,
        }
    }

    fn frozen(mut self) -> Self {
        self.frozen = true;
        self
    }
}

/// Output shape of one layer applied to `(H, W, C)` or `(F)` per-sample input.
fn layer_output(kind: &LayerKind, input: &[usize]) -> Result<Vec<usize>> {
    let spatial = |what: &str| -> Result<(usize, usize, usize)> {
        match input {
            [h, w, c] => Ok((*h, *w, *c)),
            _ => Err(Error::Shape(format!("{what} needs (H, W, C) input, got {input:?}"))),
        }
    };
    Ok(match kind {
        LayerKind::Conv {
            kernel,
            filters,
            stride,
            same,
        } => {
            let (h, w, _) = spatial("conv")?;
            if *same {
                vec![h.div_ceil(*stride), w.div_ceil(*stride), *filters]
            } else {
                if h < *kernel || w < *kernel {
                    return Err(Error::Shape(format!("valid conv {kernel}x{kernel} on {h}x{w}")));
                }
                vec![(h - kernel) / stride + 1, (w - kernel) / stride + 1, *filters]
            }
        }
        LayerKind::MaxPool { window, stride } => {
            let (h, w, c) = spatial("maxpool")?;
            if h < *window || w < *window {
                return Err(Error::Shape(format!("maxpool {window}x{window} on {h}x{w}")));
            }
            vec![(h - window) / stride + 1, (w - window) / stride + 1, c]
        }
        LayerKind::GlobalAvgPool => vec![spatial("global average pool")?.2],
        LayerKind::Flatten => vec![input.iter().product()],
        LayerKind::Dense { units } => match input {
            [_] => vec![*units],
            _ => return Err(Error::Shape(format!("dense needs flat input, got {input:?}"))),
        },
        LayerKind::BatchNorm
        | LayerKind::Relu
        | LayerKind::Dropout { .. }
        | LayerKind::Softmax
        | LayerKind::Rescale { .. } => input.to_vec(),
    })
}

fn layer_param_count(kind: &LayerKind, input: &[usize]) -> usize {
    match kind {
        LayerKind::Conv { kernel, filters, .. } => kernel * kernel * input[2] * filters + filters,
        LayerKind::BatchNorm => 2 * input[input.len() - 1],
        LayerKind::Dense { units } => input[0] * units + units,
        _ => 0,
    }
}

/// Per-layer output shapes of a fragment, starting from a per-sample input shape.
pub fn fragment_shapes(layers: &[LayerSpec], input: &[usize]) -> Result<Vec<Vec<usize>>> {
    let mut cur = input.to_vec();
    let mut out = Vec::with_capacity(layers.len());
    for l in layers {
        cur = layer_output(&l.kind, &cur).map_err(|e| Error::Shape(format!("layer `{}`: {e}", l.name)))?;
        out.push(cur.clone());
    }
    Ok(out)
}

/// Trainable-array element count of a fragment (batch-norm running statistics excluded).
pub fn fragment_param_count(layers: &[LayerSpec], input: &[usize]) -> Result<usize> {
    let shapes = fragment_shapes(layers, input)?;
    let mut prev = input.to_vec();
    let mut total = 0;
    for (l, s) in layers.iter().zip(shapes) {
        total += layer_param_count(&l.kind, &prev);
        prev = s;
    }
    Ok(total)
}

/// One sequential classifier: named layers over a 224x224x3 input ending in a 3-way softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub name: String,
    pub input: [usize; 3],
    pub layers: Vec<LayerSpec>,
}

impl ModelSpec {
    pub fn new(name: impl Into<String>, layers: Vec<LayerSpec>) -> Result<Self> {
        let spec = ModelSpec {
            name: name.into(),
            input: [IMAGE_SIZE, IMAGE_SIZE, 3],
            layers,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<Vec<Vec<usize>>> {
        let shapes = fragment_shapes(&self.layers, &self.input)?;
        let softmaxes = self.layers.iter().filter(|l| l.kind == LayerKind::Softmax).count();
        let last_ok = matches!(self.layers.last(), Some(l) if l.kind == LayerKind::Softmax);
        if softmaxes != 1 || !last_ok || shapes.last() != Some(&vec![NUM_CLASSES]) {
            return Err(Error::Shape(format!(
                "model `{}` must end in exactly one softmax of width {NUM_CLASSES}",
                self.name
            )));
        }
        Ok(shapes)
    }

    /// Line-per-layer text form hashed into the digest.
    pub fn canonical(&self) -> String {
        let mut s = format!(
            "model {} input={}x{}x{}\n",
            self.name, self.input[0], self.input[1], self.input[2]
        );
        for l in &self.layers {
            let _ = writeln!(
                s,
                "{}|{}|{}",
                l.name,
                l.kind.canonical(),
                if l.frozen { "frozen" } else { "train" }
            );
        }
        s
    }

    pub fn digest(&self) -> u64 {
        fnv1a64(self.canonical().as_bytes())
    }

    pub fn param_count(&self) -> usize {
        fragment_param_count(&self.layers, &self.input).expect("validated spec")
    }

    /// Builds the network; frozen layers draw weights from `frozen_seed`, the rest from `trainable_seed`.
    pub fn instantiate<T: Real>(&self, frozen_seed: u64, trainable_seed: u64) -> Result<Network<T>> {
        let mut frozen_rng = ChaCha8Rng::seed_from_u64(frozen_seed);
        let mut train_rng = ChaCha8Rng::seed_from_u64(trainable_seed);
        let mut shape = self.input.to_vec();
        let mut slots = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let rng = if l.frozen { &mut frozen_rng } else { &mut train_rng };
            let layer = match &l.kind {
                LayerKind::Conv {
                    kernel,
                    filters,
                    stride,
                    same,
                } => Layer::Conv2d(Conv2d::new(
                    *kernel,
                    *kernel,
                    shape[2],
                    *filters,
                    *stride,
                    if *same { Padding::Same } else { Padding::Valid },
                    rng,
                )),
                LayerKind::BatchNorm => Layer::BatchNorm(BatchNorm::new(shape[shape.len() - 1])),
                LayerKind::Relu => Layer::Relu(Relu::new()),
                LayerKind::Dropout { rate } => Layer::Dropout(Dropout::new(*rate)?),
                LayerKind::MaxPool { window, stride } => Layer::MaxPool(MaxPool::new(*window, *stride)),
                LayerKind::GlobalAvgPool => Layer::GlobalAvgPool(GlobalAvgPool::default()),
                LayerKind::Flatten => Layer::Flatten(Flatten::default()),
                LayerKind::Dense { units } => Layer::Dense(Dense::new(shape[0], *units, rng)),
                LayerKind::Softmax => Layer::Softmax(Softmax::new()),
                LayerKind::Rescale { scale, offset } => Layer::Rescale(Rescale {
                    scale: *scale,
                    offset: *offset,
                }),
            };
            shape = layer_output(&l.kind, &shape)?;
            slots.push(Slot {
                name: l.name.clone(),
                frozen: l.frozen,
                layer,
            });
        }
        Network::new(slots)
    }
}

/// Four blocks of conv 3x3 (16/32/64/128 filters, same padding), batch norm, ReLU,
/// dropout 0.5 and 2x2 max pooling, then dropout, flatten, dense 64, ReLU, dense 3, softmax.
pub fn build_custom_cnn() -> ModelSpec {
    let mut layers = Vec::new();
    for (i, filters) in [16, 32, 64, 128].into_iter().enumerate() {
        let b = i + 1;
        layers.push(LayerSpec::new(
            format!("block{b}.conv"),
            LayerKind::Conv {
                kernel: 3,
                filters,
                stride: 1,
                same: true,
            },
        ));
        layers.push(LayerSpec::new(format!("block{b}.bn"), LayerKind::BatchNorm));
        layers.push(LayerSpec::new(format!("block{b}.relu"), LayerKind::Relu));
        layers.push(LayerSpec::new(
            format!("block{b}.dropout"),
            LayerKind::Dropout { rate: DROPOUT_RATE },
        ));
        layers.push(LayerSpec::new(
            format!("block{b}.pool"),
            LayerKind::MaxPool { window: 2, stride: 2 },
        ));
    }
    layers.extend([
        LayerSpec::new("dropout", LayerKind::Dropout { rate: DROPOUT_RATE }),
        LayerSpec::new("flatten", LayerKind::Flatten),
        LayerSpec::new("fc1", LayerKind::Dense { units: 64 }),
        LayerSpec::new("fc1.relu", LayerKind::Relu),
        LayerSpec::new("fc2", LayerKind::Dense { units: NUM_CLASSES }),
        LayerSpec::new("softmax", LayerKind::Softmax),
    ]);
    ModelSpec::new("custom_cnn", layers).expect("custom CNN chains")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadVariant {
    VggStyle,
    InceptionStyle,
}

/// Classification head over backbone feature maps.
///
/// `VggStyle`: dropout, global average pooling, dense 256, dense 64, dense 3.
/// `InceptionStyle`: dropout, global average pooling, one dense 3.
pub fn build_head(feature_channels: usize, variant: HeadVariant) -> Result<Vec<LayerSpec>> {
    if feature_channels == 0 {
        return Err(Error::InvalidArgument("head needs at least one feature channel".into()));
    }
    let mut layers = vec![
        LayerSpec::new("head.dropout", LayerKind::Dropout { rate: DROPOUT_RATE }),
        LayerSpec::new("head.gap", LayerKind::GlobalAvgPool),
    ];
    if variant == HeadVariant::VggStyle {
        layers.extend([
            LayerSpec::new("head.fc1", LayerKind::Dense { units: 256 }),
            LayerSpec::new("head.fc1.relu", LayerKind::Relu),
            LayerSpec::new("head.fc2", LayerKind::Dense { units: 64 }),
            LayerSpec::new("head.fc2.relu", LayerKind::Relu),
        ]);
    }
    layers.extend([
        LayerSpec::new("head.out", LayerKind::Dense { units: NUM_CLASSES }),
        LayerSpec::new("head.softmax", LayerKind::Softmax),
    ]);
    Ok(layers)
}

/// Input preprocessing placed before the backbone: pixel range `[0, 1]` to `[-1, 1]`
/// for the inception-style member, nothing for the VGG-style one.
pub fn build_preprocess(variant: HeadVariant) -> Vec<LayerSpec> {
    match variant {
        HeadVariant::VggStyle => Vec::new(),
        HeadVariant::InceptionStyle => {
            vec![LayerSpec::new(
                "preprocess",
                LayerKind::Rescale {
                    scale: 2.0,
                    offset: -1.0,
                },
            )
            .frozen()]
        }
    }
}

pub const BACKBONE_FILTERS: [usize; 3] = [8, 16, 32];

/// Small frozen feature extractor: three blocks of conv 3x3 (8/16/32 filters), ReLU, 2x2 max pool.
pub fn build_desk_backbone() -> Vec<LayerSpec> {
    let mut layers = Vec::new();
    for (i, filters) in BACKBONE_FILTERS.into_iter().enumerate() {
        let b = i + 1;
        layers.push(
            LayerSpec::new(
                format!("backbone{b}.conv"),
                LayerKind::Conv {
                    kernel: 3,
                    filters,
                    stride: 1,
                    same: true,
                },
            )
            .frozen(),
        );
        layers.push(LayerSpec::new(format!("backbone{b}.relu"), LayerKind::Relu).frozen());
        layers.push(LayerSpec::new(format!("backbone{b}.pool"), LayerKind::MaxPool { window: 2, stride: 2 }).frozen());
    }
    layers
}

/// Preprocess + frozen backbone + head.
pub fn build_transfer_member(name: &str, variant: HeadVariant) -> ModelSpec {
    let mut layers = build_preprocess(variant);
    layers.extend(build_desk_backbone());
    layers.extend(build_head(*BACKBONE_FILTERS.last().expect("filters"), variant).expect("non-zero channels"));
    ModelSpec::new(name, layers).expect("transfer member chains")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelProfile {
    CustomCnn,
    #[default]
    Ensemble,
}

/// One or more member models whose probabilities are averaged.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierSpec {
    pub members: Vec<ModelSpec>,
}

impl ClassifierSpec {
    pub fn for_profile(profile: ModelProfile) -> Self {
        match profile {
            ModelProfile::CustomCnn => ClassifierSpec {
                members: vec![build_custom_cnn()],
            },
            ModelProfile::Ensemble => ClassifierSpec {
                members: vec![
                    build_transfer_member("vgg_a", HeadVariant::VggStyle),
                    build_transfer_member("vgg_b", HeadVariant::VggStyle),
                    build_transfer_member("inception", HeadVariant::InceptionStyle),
                ],
            },
        }
    }

    pub fn canonical(&self) -> String {
        let mut s = format!("classifier members={}\n", self.members.len());
        for m in &self.members {
            s.push_str(&m.canonical());
        }
        s
    }

    pub fn digest(&self) -> u64 {
        fnv1a64(self.canonical().as_bytes())
    }

    /// Frozen weights of member `i` come from `derive_seed(backbone_seed, "backbone", i)`,
    /// trainable ones from `derive_seed(head_seed, "head", i)`.
    pub fn instantiate<T: Real>(&self, backbone_seed: u64, head_seed: u64) -> Result<Vec<Network<T>>> {
        self.members
            .iter()
            .enumerate()
            .map(|(i, m)| {
                m.instantiate(
                    derive_seed(backbone_seed, "backbone", i as u64),
                    derive_seed(head_seed, "head", i as u64),
                )
            })
            .collect()
    }
}
