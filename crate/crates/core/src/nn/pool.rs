use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

/// Max pooling over NHWC input; ties route the gradient to the first maximum in
/// row-major window order.
#[derive(Debug, Clone)]
pub struct MaxPool {
    pub window: usize,
    pub stride: usize,
    cache: Option<(Vec<usize>, Vec<usize>)>,
}

impl MaxPool {
    pub fn new(window: usize, stride: usize) -> Self {
        MaxPool {
            window,
            stride,
            cache: None,
        }
    }

    pub fn output_shape(&self, s: &[usize]) -> Result<Vec<usize>> {
        if s.len() != 4 || s[1] < self.window || s[2] < self.window {
            return Err(Error::Shape(format!(
                "maxpool {w}x{w} needs (N, H>={w}, W>={w}, C) input, got {s:?}",
                w = self.window
            )));
        }
        Ok(vec![
            s[0],
            (s[1] - self.window) / self.stride + 1,
            (s[2] - self.window) / self.stride + 1,
            s[3],
        ])
    }

    pub fn forward<T: Real>(&mut self, x: &Tensor<T>, keep: bool) -> Result<Tensor<T>> {
        let os = self.output_shape(x.shape())?;
        let (h, w, c) = (x.shape()[1], x.shape()[2], x.shape()[3]);
        let mut out = Tensor::zeros(&os);
        let mut argmax = vec![0usize; out.len()];
        let xd = x.data();
        let mut o = 0;
        for n in 0..os[0] {
            for oy in 0..os[1] {
                for ox in 0..os[2] {
                    for ch in 0..c {
                        let mut best = T::neg_infinity();
                        let mut best_i = 0;
                        for ky in 0..self.window {
                            for kx in 0..self.window {
                                let i = ((n * h + oy * self.stride + ky) * w + ox * self.stride + kx) * c + ch;
                                if xd[i] > best {
                                    best = xd[i];
                                    best_i = i;
                                }
                            }
                        }
                        out.data_mut()[o] = best;
                        argmax[o] = best_i;
                        o += 1;
                    }
                }
            }
        }
        self.cache = keep.then(|| (argmax, x.shape().to_vec()));
        Ok(out)
    }

    pub fn backward<T: Real>(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let (argmax, shape) = self
            .cache
            .take()
            .ok_or_else(|| Error::Shape("maxpool backward without a cached forward".into()))?;
        if grad.len() != argmax.len() {
            return Err(Error::Shape(format!("maxpool grad {:?}", grad.shape())));
        }
        let mut dx = Tensor::zeros(&shape);
        for (&i, &g) in argmax.iter().zip(grad.data()) {
            dx.data_mut()[i] += g;
        }
        Ok(dx)
    }
}

/// Spatial mean per channel: `(N, H, W, C) -> (N, C)`.
#[derive(Debug, Clone, Default)]
pub struct GlobalAvgPool {
    input_shape: Option<Vec<usize>>,
}

impl GlobalAvgPool {
    pub fn forward<T: Real>(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let s = x.shape();
        if s.len() != 4 {
            return Err(Error::Shape(format!("global average pool needs NHWC input, got {s:?}")));
        }
        let (n, hw, c) = (s[0], s[1] * s[2], s[3]);
        let mut out = Tensor::zeros(&[n, c]);
        let inv = T::of(1.0 / hw as f64);
        for (b, orow) in out.data_mut().chunks_exact_mut(c).enumerate() {
            for px in x.data()[b * hw * c..(b + 1) * hw * c].chunks_exact(c) {
                for (o, &v) in orow.iter_mut().zip(px) {
                    *o += v;
                }
            }
            orow.iter_mut().for_each(|v| *v *= inv);
        }
        self.input_shape = Some(s.to_vec());
        Ok(out)
    }

    pub fn backward<T: Real>(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let s = self
            .input_shape
            .take()
            .ok_or_else(|| Error::Shape("global average pool backward without a cached forward".into()))?;
        let (hw, c) = (s[1] * s[2], s[3]);
        let inv = T::of(1.0 / hw as f64);
        let mut dx = Tensor::zeros(&s);
        for (b, grow) in grad.data().chunks_exact(c).enumerate() {
            for px in dx.data_mut()[b * hw * c..(b + 1) * hw * c].chunks_exact_mut(c) {
                for (d, &g) in px.iter_mut().zip(grow) {
                    *d = g * inv;
                }
            }
        }
        Ok(dx)
    }
}
