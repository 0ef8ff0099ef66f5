use rand_chacha::ChaCha8Rng;

use super::layer::{kaiming_uniform, Param};
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Output spatial size `ceil(in / stride)`, zero padding split with the extra row/column at the bottom/right.
    Same,
    Valid,
}

/// 2-D cross-correlation over NHWC input with kernels laid out `(kh, kw, cin, cout)`.
#[derive(Debug, Clone)]
pub struct Conv2d<T> {
    pub kernel: Param<T>,
    pub bias: Param<T>,
    pub stride: usize,
    pub padding: Padding,
    input: Option<Tensor<T>>,
}

struct Geometry {
    n: usize,
    h: usize,
    w: usize,
    cin: usize,
    kh: usize,
    kw: usize,
    cout: usize,
    oh: usize,
    ow: usize,
    pad_top: usize,
    pad_left: usize,
}

impl<T: Real> Conv2d<T> {
    pub fn new(
        kh: usize,
        kw: usize,
        cin: usize,
        cout: usize,
        stride: usize,
        padding: Padding,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let kernel = kaiming_uniform(&[kh, kw, cin, cout], kh * kw * cin, rng);
        Conv2d {
            kernel: Param::new("kernel", kernel),
            bias: Param::new("bias", Tensor::zeros(&[cout])),
            stride,
            padding,
            input: None,
        }
    }

    pub fn from_parts(kernel: Tensor<T>, bias: Tensor<T>, stride: usize, padding: Padding) -> Result<Self> {
        if kernel.shape().len() != 4 || bias.shape() != [kernel.shape()[3]] {
            return Err(Error::Shape(format!(
                "conv kernel {:?} with bias {:?}",
                kernel.shape(),
                bias.shape()
            )));
        }
        Ok(Conv2d {
            kernel: Param::new("kernel", kernel),
            bias: Param::new("bias", bias),
            stride,
            padding,
            input: None,
        })
    }

    fn geometry(&self, shape: &[usize]) -> Result<Geometry> {
        let ks = self.kernel.value.shape();
        let (kh, kw, kcin, cout) = (ks[0], ks[1], ks[2], ks[3]);
        if shape.len() != 4 || shape[3] != kcin {
            return Err(Error::Shape(format!(
                "conv expects (N, H, W, {kcin}) input, got {shape:?}"
            )));
        }
        let (n, h, w) = (shape[0], shape[1], shape[2]);
        let s = self.stride;
        let (oh, ow, pad_top, pad_left) = match self.padding {
            Padding::Same => {
                let oh = h.div_ceil(s);
                let ow = w.div_ceil(s);
                let ph = ((oh - 1) * s + kh).saturating_sub(h);
                let pw = ((ow - 1) * s + kw).saturating_sub(w);
                (oh, ow, ph / 2, pw / 2)
            }
            Padding::Valid => {
                if h < kh || w < kw {
                    return Err(Error::Shape(format!(
                        "valid conv with {kh}x{kw} kernel on {h}x{w} input"
                    )));
                }
                ((h - kh) / s + 1, (w - kw) / s + 1, 0, 0)
            }
        };
        Ok(Geometry {
            n,
            h,
            w,
            cin: kcin,
            kh,
            kw,
            cout,
            oh,
            ow,
            pad_top,
            pad_left,
        })
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let g = self.geometry(input)?;
        Ok(vec![g.n, g.oh, g.ow, g.cout])
    }

    /// Input coordinate for an output coordinate and kernel tap, if inside the image.
    #[inline]
    fn tap(o: usize, k: usize, stride: usize, pad: usize, len: usize) -> Option<usize> {
        (o * stride + k).checked_sub(pad).filter(|&i| i < len)
    }

    pub fn forward(&mut self, x: &Tensor<T>, keep_input: bool) -> Result<Tensor<T>> {
        let g = self.geometry(x.shape())?;
        let mut out = Tensor::zeros(&[g.n, g.oh, g.ow, g.cout]);
        let xd = x.data();
        let wd = self.kernel.value.data();
        let bd = self.bias.value.data();
        let od = out.data_mut();
        for n in 0..g.n {
            for oy in 0..g.oh {
                for ox in 0..g.ow {
                    let o_off = ((n * g.oh + oy) * g.ow + ox) * g.cout;
                    let acc = &mut od[o_off..o_off + g.cout];
                    acc.copy_from_slice(bd);
                    for ky in 0..g.kh {
                        let Some(iy) = Self::tap(oy, ky, self.stride, g.pad_top, g.h) else {
                            continue;
                        };
                        for kx in 0..g.kw {
                            let Some(ix) = Self::tap(ox, kx, self.stride, g.pad_left, g.w) else {
                                continue;
                            };
                            let x_off = ((n * g.h + iy) * g.w + ix) * g.cin;
                            let w_off = (ky * g.kw + kx) * g.cin * g.cout;
                            for (ic, &xv) in xd[x_off..x_off + g.cin].iter().enumerate() {
                                let wrow = &wd[w_off + ic * g.cout..w_off + (ic + 1) * g.cout];
                                for (a, &wv) in acc.iter_mut().zip(wrow) {
                                    *a += xv * wv;
                                }
                            }
                        }
                    }
                }
            }
        }
        self.input = keep_input.then(|| x.clone());
        Ok(out)
    }

    pub fn backward(&mut self, grad: &Tensor<T>, want_input_grad: bool) -> Result<Tensor<T>> {
        let x = self
            .input
            .take()
            .ok_or_else(|| Error::Shape("conv backward without a cached forward".into()))?;
        let g = self.geometry(x.shape())?;
        if grad.shape() != [g.n, g.oh, g.ow, g.cout] {
            return Err(Error::Shape(format!(
                "conv grad {:?}, expected {:?}",
                grad.shape(),
                [g.n, g.oh, g.ow, g.cout]
            )));
        }
        let mut dw = Tensor::zeros(self.kernel.value.shape());
        let mut db = Tensor::zeros(&[g.cout]);
        let mut dx = if want_input_grad {
            Tensor::zeros(x.shape())
        } else {
            Tensor::empty()
        };
        let xd = x.data();
        let wd = self.kernel.value.data();
        let gd = grad.data();
        {
            let dwd = dw.data_mut();
            let dbd = db.data_mut();
            let dxd = dx.data_mut();
            for n in 0..g.n {
                for oy in 0..g.oh {
                    for ox in 0..g.ow {
                        let o_off = ((n * g.oh + oy) * g.ow + ox) * g.cout;
                        let grow = &gd[o_off..o_off + g.cout];
                        for (b, &gv) in dbd.iter_mut().zip(grow) {
                            *b += gv;
                        }
                        for ky in 0..g.kh {
                            let Some(iy) = Self::tap(oy, ky, self.stride, g.pad_top, g.h) else {
                                continue;
                            };
                            for kx in 0..g.kw {
                                let Some(ix) = Self::tap(ox, kx, self.stride, g.pad_left, g.w) else {
                                    continue;
                                };
                                let x_off = ((n * g.h + iy) * g.w + ix) * g.cin;
                                let w_off = (ky * g.kw + kx) * g.cin * g.cout;
                                for ic in 0..g.cin {
                                    let xv = xd[x_off + ic];
                                    let r = w_off + ic * g.cout..w_off + (ic + 1) * g.cout;
                                    for (d, &gv) in dwd[r.clone()].iter_mut().zip(grow) {
                                        *d += xv * gv;
                                    }
                                    if want_input_grad {
                                        let s: T = wd[r].iter().zip(grow).map(|(&wv, &gv)| wv * gv).sum();
                                        dxd[x_off + ic] += s;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        self.kernel.grad = dw;
        self.bias.grad = db;
        Ok(dx)
    }

    pub fn params_mut(&mut self) -> [&mut Param<T>; 2] {
        [&mut self.kernel, &mut self.bias]
    }

    pub fn params(&self) -> [&Param<T>; 2] {
        [&self.kernel, &self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_one_by_one_kernel() {
        let x = Tensor::from_vec(&[1, 3, 3, 1], (1..=9).map(|v| v as f64).collect()).unwrap();
        let mut c = Conv2d::from_parts(
            Tensor::from_vec(&[1, 1, 1, 1], vec![1.0]).unwrap(),
            Tensor::zeros(&[1]),
            1,
            Padding::Same,
        )
        .unwrap();
        assert_eq!(c.forward(&x, false).unwrap(), x);
    }

    #[test]
    fn valid_sum_of_ones() {
        let x = Tensor::filled(&[1, 3, 3, 1], 1.0f32);
        let mut c = Conv2d::from_parts(
            Tensor::filled(&[3, 3, 1, 1], 1.0),
            Tensor::zeros(&[1]),
            1,
            Padding::Valid,
        )
        .unwrap();
        let y = c.forward(&x, false).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.data(), &[9.0]);
    }

    #[test]
    fn same_padding_keeps_size_and_rejects_channel_mismatch() {
        let mut rng = rand::SeedableRng::seed_from_u64(1);
        let mut c = Conv2d::<f32>::new(3, 3, 2, 4, 1, Padding::Same, &mut rng);
        let y = c.forward(&Tensor::zeros(&[2, 7, 5, 2]), false).unwrap();
        assert_eq!(y.shape(), &[2, 7, 5, 4]);
        assert!(c.forward(&Tensor::zeros(&[1, 4, 4, 3]), false).is_err());
    }
}
