use rand_chacha::ChaCha8Rng;

use super::layer::{kaiming_uniform, Param};
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

/// Affine map `x W + b` over `(N, in)` input, `W` laid out `(in, out)`.
#[derive(Debug, Clone)]
pub struct Dense<T> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    input: Option<Tensor<T>>,
}

impl<T: Real> Dense<T> {
    pub fn new(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        Dense {
            weight: Param::new("weight", kaiming_uniform(&[inputs, outputs], inputs, rng)),
            bias: Param::new("bias", Tensor::zeros(&[outputs])),
            input: None,
        }
    }

    pub fn from_parts(weight: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        if weight.shape().len() != 2 || bias.shape() != [weight.shape()[1]] {
            return Err(Error::Shape(format!(
                "dense weight {:?} with bias {:?}",
                weight.shape(),
                bias.shape()
            )));
        }
        Ok(Dense {
            weight: Param::new("weight", weight),
            bias: Param::new("bias", bias),
            input: None,
        })
    }

    fn dims(&self) -> (usize, usize) {
        (self.weight.value.shape()[0], self.weight.value.shape()[1])
    }

    pub fn forward(&mut self, x: &Tensor<T>, keep_input: bool) -> Result<Tensor<T>> {
        let (fin, fout) = self.dims();
        if x.shape().len() != 2 || x.shape()[1] != fin {
            return Err(Error::Shape(format!(
                "dense expects (N, {fin}) input, got {:?}",
                x.shape()
            )));
        }
        let n = x.batch();
        let mut out = Tensor::zeros(&[n, fout]);
        let w = self.weight.value.data();
        for (xrow, orow) in x.data().chunks_exact(fin).zip(out.data_mut().chunks_exact_mut(fout)) {
            orow.copy_from_slice(self.bias.value.data());
            for (i, &xv) in xrow.iter().enumerate() {
                if xv == T::zero() {
                    continue;
                }
                for (o, &wv) in orow.iter_mut().zip(&w[i * fout..(i + 1) * fout]) {
                    *o += xv * wv;
                }
            }
        }
        self.input = keep_input.then(|| x.clone());
        Ok(out)
    }

    pub fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self
            .input
            .take()
            .ok_or_else(|| Error::Shape("dense backward without a cached forward".into()))?;
        let (fin, fout) = self.dims();
        if grad.shape() != [x.batch(), fout] {
            return Err(Error::Shape(format!("dense grad {:?}", grad.shape())));
        }
        let mut dw = Tensor::zeros(&[fin, fout]);
        let mut db = Tensor::zeros(&[fout]);
        let mut dx = Tensor::zeros(x.shape());
        let w = self.weight.value.data();
        for ((xrow, grow), dxrow) in x
            .data()
            .chunks_exact(fin)
            .zip(grad.data().chunks_exact(fout))
            .zip(dx.data_mut().chunks_exact_mut(fin))
        {
            for (b, &g) in db.data_mut().iter_mut().zip(grow) {
                *b += g;
            }
            for i in 0..fin {
                let wrow = &w[i * fout..(i + 1) * fout];
                dxrow[i] = wrow.iter().zip(grow).map(|(&a, &b)| a * b).sum();
                let xv = xrow[i];
                for (d, &g) in dw.data_mut()[i * fout..(i + 1) * fout].iter_mut().zip(grow) {
                    *d += xv * g;
                }
            }
        }
        self.weight.grad = dw;
        self.bias.grad = db;
        Ok(dx)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Relu<T> {
    input: Option<Tensor<T>>,
}

impl<T: Real> Relu<T> {
    pub fn new() -> Self {
        Relu { input: None }
    }

    pub fn forward(&mut self, x: &Tensor<T>, keep_input: bool) -> Tensor<T> {
        self.input = keep_input.then(|| x.clone());
        x.map(|v| v.max(T::zero()))
    }

    pub fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self
            .input
            .take()
            .ok_or_else(|| Error::Shape("relu backward without a cached forward".into()))?;
        let mut out = grad.clone();
        for (g, &v) in out.data_mut().iter_mut().zip(x.data()) {
            if v <= T::zero() {
                *g = T::zero();
            }
        }
        Ok(out)
    }
}

/// Row-wise softmax over the last axis, stabilized by subtracting the row maximum.
#[derive(Debug, Clone, Default)]
pub struct Softmax<T> {
    output: Option<Tensor<T>>,
}

pub fn softmax_rows<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let c = *x.shape().last().expect("rank >= 1");
    let mut out = x.clone();
    for row in out.data_mut().chunks_exact_mut(c) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

impl<T: Real> Softmax<T> {
    pub fn new() -> Self {
        Softmax { output: None }
    }

    pub fn forward(&mut self, x: &Tensor<T>, keep_output: bool) -> Tensor<T> {
        let y = softmax_rows(x);
        self.output = keep_output.then(|| y.clone());
        y
    }

    /// Full Jacobian-vector product `y * (g - <g, y>)` per row.
    pub fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self
            .output
            .take()
            .ok_or_else(|| Error::Shape("softmax backward without a cached forward".into()))?;
        let c = *y.shape().last().expect("rank >= 1");
        let mut out = grad.clone();
        for (g, yr) in out.data_mut().chunks_exact_mut(c).zip(y.data().chunks_exact(c)) {
            let dot: T = g.iter().zip(yr).map(|(&a, &b)| a * b).sum();
            for (gv, &yv) in g.iter_mut().zip(yr) {
                *gv = yv * (*gv - dot);
            }
        }
        Ok(out)
    }
}

/// Collapses every axis after the batch axis.
#[derive(Debug, Clone, Default)]
pub struct Flatten {
    input_shape: Option<Vec<usize>>,
}

impl Flatten {
    pub fn forward<T: Real>(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.input_shape = Some(x.shape().to_vec());
        let n = x.batch();
        x.clone().reshape(&[n, x.len() / n.max(1)])
    }

    pub fn backward<T: Real>(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self
            .input_shape
            .take()
            .ok_or_else(|| Error::Shape("flatten backward without a cached forward".into()))?;
        grad.clone().reshape(&shape)
    }
}

/// `x * scale + offset`, used to map `[0, 1]` pixels into `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rescale {
    pub scale: f64,
    pub offset: f64,
}

impl Rescale {
    pub fn forward<T: Real>(&self, x: &Tensor<T>) -> Tensor<T> {
        let (s, o) = (T::of(self.scale), T::of(self.offset));
        x.map(|v| v * s + o)
    }

    pub fn backward<T: Real>(&self, grad: &Tensor<T>) -> Tensor<T> {
        let s = T::of(self.scale);
        grad.map(|v| v * s)
    }
}
