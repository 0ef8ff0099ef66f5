use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::conv::Conv2d;
use super::dense::{Dense, Flatten, Relu, Rescale, Softmax};
use super::pool::{GlobalAvgPool, MaxPool};
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// A trainable array and its most recent gradient.
#[derive(Debug, Clone)]
pub struct Param<T> {
    pub name: &'static str,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

impl<T: Real> Param<T> {
    pub fn new(name: &'static str, value: Tensor<T>) -> Self {
        let grad = Tensor::zeros(value.shape());
        Param { name, value, grad }
    }
}

/// Kaiming-uniform: `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`.
pub fn kaiming_uniform<T: Real>(shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor<T> {
    let bound = (6.0 / fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| T::of(rng.gen_range(-bound..bound))).collect();
    Tensor::from_vec(shape, data).expect("sized")
}

/// Per-channel batch normalization over every axis but the last.
#[derive(Debug, Clone)]
pub struct BatchNorm<T> {
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub momentum: f64,
    pub eps: f64,
    cache: Option<(Tensor<T>, Vec<T>)>,
}

impl<T: Real> BatchNorm<T> {
    pub const MOMENTUM: f64 = 0.9;
    pub const EPS: f64 = 1e-5;

    pub fn new(channels: usize) -> Self {
        BatchNorm {
            gamma: Param::new("gamma", Tensor::filled(&[channels], T::one())),
            beta: Param::new("beta", Tensor::zeros(&[channels])),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::filled(&[channels], T::one()),
            momentum: Self::MOMENTUM,
            eps: Self::EPS,
            cache: None,
        }
    }

    fn channels(&self) -> usize {
        self.gamma.value.len()
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let c = self.channels();
        if x.shape().last() != Some(&c) {
            return Err(Error::Shape(format!("batchnorm over {c} channels got {:?}", x.shape())));
        }
        let gamma = self.gamma.value.data();
        let beta = self.beta.value.data();
        let eps = T::of(self.eps);
        match mode {
            Mode::Infer => {
                let rm = self.running_mean.data();
                let rv = self.running_var.data();
                let scale: Vec<T> = (0..c).map(|k| gamma[k] / (rv[k] + eps).sqrt()).collect();
                let mut out = x.clone();
                for row in out.data_mut().chunks_exact_mut(c) {
                    for k in 0..c {
                        row[k] = (row[k] - rm[k]) * scale[k] + beta[k];
                    }
                }
                Ok(out)
            }
            Mode::Train => {
                if x.batch() < 2 {
                    return Err(Error::Shape(
                        "batchnorm in train mode needs a batch of at least 2".into(),
                    ));
                }
                let m = x.len() / c;
                let mf = T::of(m as f64);
                let mut mean = vec![T::zero(); c];
                for row in x.data().chunks_exact(c) {
                    for k in 0..c {
                        mean[k] += row[k];
                    }
                }
                mean.iter_mut().for_each(|v| *v /= mf);
                let mut var = vec![T::zero(); c];
                for row in x.data().chunks_exact(c) {
                    for k in 0..c {
                        let d = row[k] - mean[k];
                        var[k] += d * d;
                    }
                }
                var.iter_mut().for_each(|v| *v /= mf);
                let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
                let mut xhat = x.clone();
                let mut out = x.clone();
                for (hrow, orow) in xhat
                    .data_mut()
                    .chunks_exact_mut(c)
                    .zip(out.data_mut().chunks_exact_mut(c))
                {
                    for k in 0..c {
                        let h = (hrow[k] - mean[k]) * inv_std[k];
                        hrow[k] = h;
                        orow[k] = gamma[k] * h + beta[k];
                    }
                }
                let mom = T::of(self.momentum);
                let rest = T::one() - mom;
                for k in 0..c {
                    let rm = &mut self.running_mean.data_mut()[k];
                    *rm = mom * *rm + rest * mean[k];
                    let rv = &mut self.running_var.data_mut()[k];
                    *rv = mom * *rv + rest * var[k];
                }
                self.cache = Some((xhat, inv_std));
                Ok(out)
            }
        }
    }

    pub fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let (xhat, inv_std) = self
            .cache
            .take()
            .ok_or_else(|| Error::Shape("batchnorm backward without a train-mode forward".into()))?;
        let c = self.channels();
        let m = T::of((xhat.len() / c) as f64);
        let mut dgamma = vec![T::zero(); c];
        let mut dbeta = vec![T::zero(); c];
        for (g, h) in grad.data().chunks_exact(c).zip(xhat.data().chunks_exact(c)) {
            for k in 0..c {
                dbeta[k] += g[k];
                dgamma[k] += g[k] * h[k];
            }
        }
        let gamma = self.gamma.value.data();
        let mut dx = grad.clone();
        for (d, h) in dx.data_mut().chunks_exact_mut(c).zip(xhat.data().chunks_exact(c)) {
            for k in 0..c {
                d[k] = gamma[k] * inv_std[k] / m * (m * d[k] - dbeta[k] - h[k] * dgamma[k]);
            }
        }
        self.gamma.grad = Tensor::from_vec(&[c], dgamma)?;
        self.beta.grad = Tensor::from_vec(&[c], dbeta)?;
        Ok(dx)
    }
}

fn keep_mask(len: usize, keep: f64, rng: &mut ChaCha8Rng) -> Vec<bool> {
    (0..len).map(|_| rng.gen::<f64>() < keep).collect()
}

/// Inverted dropout.
#[derive(Debug, Clone)]
pub struct Dropout {
    pub rate: f64,
    mask: Option<Vec<bool>>,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate must be in [0, 1), got {rate}"
            )));
        }
        Ok(Dropout { rate, mask: None })
    }

    pub fn forward<T: Real>(&mut self, x: &Tensor<T>, mode: Mode, rng: &mut ChaCha8Rng) -> Tensor<T> {
        if mode == Mode::Infer || self.rate == 0.0 {
            self.mask = None;
            return x.clone();
        }
        let keep = 1.0 - self.rate;
        let mask = keep_mask(x.len(), keep, rng);
        let scale = T::of(1.0 / keep);
        let mut out = x.clone();
        for (v, &k) in out.data_mut().iter_mut().zip(&mask) {
            *v = if k { *v * scale } else { T::zero() };
        }
        self.mask = Some(mask);
        out
    }

    pub fn backward<T: Real>(&mut self, grad: &Tensor<T>) -> Tensor<T> {
        match self.mask.take() {
            None => grad.clone(),
            Some(mask) => {
                let scale = T::of(1.0 / (1.0 - self.rate));
                let mut out = grad.clone();
                for (v, &k) in out.data_mut().iter_mut().zip(&mask) {
                    *v = if k { *v * scale } else { T::zero() };
                }
                out
            }
        }
    }
}

/// One layer of a sequential network.
#[derive(Debug, Clone)]
pub enum Layer<T> {
    Conv2d(Conv2d<T>),
    BatchNorm(BatchNorm<T>),
    Relu(Relu<T>),
    Dropout(Dropout),
    MaxPool(MaxPool),
    GlobalAvgPool(GlobalAvgPool),
    Flatten(Flatten),
    Dense(Dense<T>),
    Softmax(Softmax<T>),
    Rescale(Rescale),
}

impl<T: Real> Layer<T> {
    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode, rng: &mut ChaCha8Rng) -> Result<Tensor<T>> {
        let keep = mode == Mode::Train;
        match self {
            Layer::Conv2d(l) => l.forward(x, keep),
            Layer::BatchNorm(l) => l.forward(x, mode),
            Layer::Relu(l) => Ok(l.forward(x, keep)),
            Layer::Dropout(l) => Ok(l.forward(x, mode, rng)),
            Layer::MaxPool(l) => l.forward(x, keep),
            Layer::GlobalAvgPool(l) => l.forward(x),
            Layer::Flatten(l) => l.forward(x),
            Layer::Dense(l) => l.forward(x, keep),
            Layer::Softmax(l) => Ok(l.forward(x, keep)),
            Layer::Rescale(l) => Ok(l.forward(x)),
        }
    }

    /// Propagates `grad` (w.r.t. this layer's output) to its input, storing parameter
    /// gradients along the way. With `want_input_grad == false` the returned tensor may be empty.
    pub fn backward(&mut self, grad: &Tensor<T>, want_input_grad: bool) -> Result<Tensor<T>> {
        match self {
            Layer::Conv2d(l) => l.backward(grad, want_input_grad),
            Layer::BatchNorm(l) => l.backward(grad),
            Layer::Relu(l) => l.backward(grad),
            Layer::Dropout(l) => Ok(l.backward(grad)),
            Layer::MaxPool(l) => l.backward(grad),
            Layer::GlobalAvgPool(l) => l.backward(grad),
            Layer::Flatten(l) => l.backward(grad),
            Layer::Dense(l) => l.backward(grad),
            Layer::Softmax(l) => l.backward(grad),
            Layer::Rescale(l) => Ok(l.backward(grad)),
        }
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        match self {
            Layer::Conv2d(l) => l.params().to_vec(),
            Layer::BatchNorm(l) => vec![&l.gamma, &l.beta],
            Layer::Dense(l) => vec![&l.weight, &l.bias],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        match self {
            Layer::Conv2d(l) => l.params_mut().into_iter().collect(),
            Layer::BatchNorm(l) => vec![&mut l.gamma, &mut l.beta],
            Layer::Dense(l) => vec![&mut l.weight, &mut l.bias],
            _ => Vec::new(),
        }
    }

    /// Non-trainable persistent arrays (batch-norm running statistics).
    pub fn buffers(&self) -> Vec<(&'static str, &Tensor<T>)> {
        match self {
            Layer::BatchNorm(l) => vec![("running_mean", &l.running_mean), ("running_var", &l.running_var)],
            _ => Vec::new(),
        }
    }

    pub fn buffers_mut(&mut self) -> Vec<(&'static str, &mut Tensor<T>)> {
        match self {
            Layer::BatchNorm(l) => vec![
                ("running_mean", &mut l.running_mean),
                ("running_var", &mut l.running_var),
            ],
            _ => Vec::new(),
        }
    }

    /// True when train-mode and infer-mode outputs coincide and no randomness is drawn.
    pub fn is_deterministic(&self) -> bool {
        !matches!(self, Layer::Dropout(_) | Layer::BatchNorm(_))
    }
}
