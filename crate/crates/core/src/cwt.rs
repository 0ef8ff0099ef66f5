//! Continuous wavelet transform with an analytic Morlet mother wavelet.
//!
//! Coefficients follow
//!
//! ```text
//! C(a, b) = sum_j f[j] * norm(a) * conj(psi((j - b) / a)) * dt
//! ```
//!
//! with scales `a` and positions `b` both measured in samples, `dt = 1 / fs` and
//! `norm(a) = 1 / a` by default (`1 / sqrt(a)` via [`ScaleNorm::L2`]).
//!
//! Two routes compute the same quantity: [`cwt_direct`] evaluates the quadrature sum
//! term by term and is the reference; [`cwt_fast`] evaluates it per scale through the
//! convolution theorem.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dataset::Signal;
use crate::error::{Error, Result};

/// Analytic Morlet wavelet `pi^(-1/4) * exp(i w0 t) * exp(-t^2 / 2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wavelet {
    pub omega0: f64,
}

impl Default for Wavelet {
    fn default() -> Self {
        Wavelet { omega0: 6.0 }
    }
}

impl Wavelet {
    /// Below `w0 = 5` the uncorrected Morlet drifts too far from zero mean.
    pub fn morlet(omega0: f64) -> Result<Self> {
        if !(omega0 >= 5.0 && omega0.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "Morlet center frequency must be >= 5 rad, got {omega0}"
            )));
        }
        Ok(Wavelet { omega0 })
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        wavelet_eval(t, self)
    }

    /// Center frequency in Hz of the wavelet dilated to `scale` samples.
    pub fn scale_to_frequency(&self, scale: f64, fs: f64) -> f64 {
        self.omega0 * fs / (2.0 * PI * scale)
    }

    /// Scale in samples whose center frequency is `freq` Hz.
    pub fn frequency_to_scale(&self, freq: f64, fs: f64) -> f64 {
        self.omega0 * fs / (2.0 * PI * freq)
    }
}

pub fn wavelet_eval(t: f64, w: &Wavelet) -> Complex64 {
    let envelope = PI.powf(-0.25) * (-0.5 * t * t).exp();
    Complex64::from_polar(envelope, w.omega0 * t)
}

/// Amplitude normalization applied per scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleNorm {
    /// `1 / a`
    #[default]
    L1,
    /// `1 / sqrt(a)`
    L2,
}

impl ScaleNorm {
    pub fn factor(self, scale: f64) -> f64 {
        match self {
            ScaleNorm::L1 => 1.0 / scale,
            ScaleNorm::L2 => 1.0 / scale.sqrt(),
        }
    }
}

/// Log-spaced scales, in samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleGrid {
    scales: Vec<f64>,
    voices_per_octave: u32,
}

impl ScaleGrid {
    /// `count` scales starting at `min_scale`, each `2^(1/voices)` times the previous.
    pub fn geometric(min_scale: f64, count: usize, voices_per_octave: u32) -> Result<Self> {
        if min_scale.is_nan() || min_scale <= 0.0 || count == 0 || voices_per_octave == 0 {
            return Err(Error::InvalidArgument(format!(
                "scale grid needs min_scale > 0, count >= 1, voices >= 1 (got {min_scale}, {count}, {voices_per_octave})"
            )));
        }
        let step = 1.0 / f64::from(voices_per_octave);
        let scales = (0..count).map(|k| min_scale * (k as f64 * step).exp2()).collect();
        Ok(ScaleGrid {
            scales,
            voices_per_octave,
        })
    }

    /// All geometric scales from `min_scale` up to and including `max_scale`.
    pub fn between(min_scale: f64, max_scale: f64, voices_per_octave: u32) -> Result<Self> {
        if max_scale.is_nan() || max_scale < min_scale || voices_per_octave == 0 {
            return Err(Error::InvalidArgument(format!(
                "invalid scale range [{min_scale}, {max_scale}]"
            )));
        }
        let octaves = (max_scale / min_scale).log2();
        let count = (octaves * f64::from(voices_per_octave) + 1e-9).floor() as usize + 1;
        Self::geometric(min_scale, count, voices_per_octave)
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    pub fn voices_per_octave(&self) -> u32 {
        self.voices_per_octave
    }

    pub fn min_scale(&self) -> f64 {
        self.scales[0]
    }

    pub fn max_scale(&self) -> f64 {
        *self.scales.last().expect("non-empty grid")
    }
}

/// Grid from 2 samples up to `n / 8` samples with `voices` scales per octave.
pub fn default_scales(n: usize, _fs: f64, voices: u32) -> Result<ScaleGrid> {
    if n < 64 {
        return Err(Error::InvalidArgument(format!(
            "signal of {n} samples is too short for a scale grid (need >= 64)"
        )));
    }
    ScaleGrid::between(2.0, n as f64 / 8.0, voices)
}

/// Coefficient matrix, `num_scales` rows by one column per evaluated position.
#[derive(Debug, Clone, PartialEq)]
pub struct CwtCoefficients {
    /// Row-major, `scales.len() * num_cols`.
    pub values: Vec<Complex64>,
    pub num_cols: usize,
    pub scales: ScaleGrid,
    pub fs: f64,
    /// Positions `b` are `0, stride, 2 * stride, ...`.
    pub stride: usize,
}

impl CwtCoefficients {
    pub fn num_scales(&self) -> usize {
        self.scales.len()
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.values[r * self.num_cols..(r + 1) * self.num_cols]
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.values[r * self.num_cols + c]
    }

    /// Binary dump: `num_scales: u64`, `num_cols: u64`, `fs: f64`, then row-major
    /// interleaved real/imaginary `f64`, all little-endian.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(&(self.num_scales() as u64).to_le_bytes())?;
        w.write_all(&(self.num_cols as u64).to_le_bytes())?;
        w.write_all(&self.fs.to_le_bytes())?;
        for z in &self.values {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn save_dump(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(24 + self.values.len() * 16);
        self.write_dump(&mut buf).map_err(|e| Error::io(path, e))?;
        crate::io::write_atomic(path, &buf)
    }
}

/// Header and raw values from a coefficient dump.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientDump {
    pub num_scales: usize,
    pub num_cols: usize,
    pub fs: f64,
    pub values: Vec<Complex64>,
}

pub fn read_dump<R: Read>(mut r: R) -> std::io::Result<CoefficientDump> {
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let num_scales = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let num_cols = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let fs = f64::from_le_bytes(word);
    let count = num_scales
        .checked_mul(num_cols)
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidData, "dump dimensions overflow"))?;
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut word)?;
        let re = f64::from_le_bytes(word);
        r.read_exact(&mut word)?;
        values.push(Complex64::new(re, f64::from_le_bytes(word)));
    }
    Ok(CoefficientDump {
        num_scales,
        num_cols,
        fs,
        values,
    })
}

/// How the fast route treats samples beyond the record ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Zero outside the record; agrees with [`cwt_direct`] at every position.
    #[default]
    ZeroExtend,
    /// Periodic signal; exactly shift covariant under circular shifts.
    Circular,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CwtOptions {
    pub wavelet: Wavelet,
    pub norm: ScaleNorm,
    pub boundary: Boundary,
    /// Keep every `stride`-th position.
    pub stride: usize,
}

impl Default for CwtOptions {
    fn default() -> Self {
        CwtOptions {
            wavelet: Wavelet::default(),
            norm: ScaleNorm::L1,
            boundary: Boundary::ZeroExtend,
            stride: 1,
        }
    }
}

fn check_signal(s: &Signal) -> Result<()> {
    if s.samples.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "CWT needs at least 2 samples, got {}",
            s.samples.len()
        )));
    }
    Ok(())
}

/// Offsets beyond this many scale widths contribute exactly zero in f64.
const SUPPORT_WIDTHS: f64 = 40.0;

/// Reference quadrature: every (scale, position) pair is a full sum over the samples,
/// with zero outside the record.
pub fn cwt_direct(s: &Signal, grid: &ScaleGrid, w: &Wavelet, norm: ScaleNorm) -> Result<CwtCoefficients> {
    check_signal(s)?;
    let n = s.samples.len();
    let dt = 1.0 / s.fs;
    let mut values = Vec::with_capacity(grid.len() * n);
    for &a in grid.scales() {
        let c = norm.factor(a) * dt;
        // kernel[m + n - 1] = c * conj(psi(m / a)) for m in -(n-1)..=(n-1)
        let kernel: Vec<Complex64> = (0..2 * n - 1)
            .map(|i| {
                let m = i as f64 - (n - 1) as f64;
                w.eval(m / a).conj() * c
            })
            .collect();
        for b in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &f) in s.samples.iter().enumerate() {
                acc += kernel[j + n - 1 - b] * f;
            }
            values.push(acc);
        }
    }
    Ok(CwtCoefficients {
        values,
        num_cols: n,
        scales: grid.clone(),
        fs: s.fs,
        stride: 1,
    })
}

/// Convolution-theorem route: per scale, the signal spectrum times the spectrum of
/// the sampled, reflected, conjugated wavelet, transformed back.
pub fn cwt_fast(s: &Signal, grid: &ScaleGrid, opts: &CwtOptions) -> Result<CwtCoefficients> {
    check_signal(s)?;
    if opts.stride == 0 {
        return Err(Error::InvalidArgument("column stride must be >= 1".into()));
    }
    let n = s.samples.len();
    let len = match opts.boundary {
        Boundary::ZeroExtend => (2 * n - 1).next_power_of_two(),
        Boundary::Circular => n,
    };
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(len);
    let inverse = planner.plan_fft_inverse(len);

    let mut spectrum: Vec<Complex64> = s
        .samples
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(len)
        .collect();
    forward.process(&mut spectrum);

    let dt = 1.0 / s.fs;
    let cols: Vec<usize> = (0..n).step_by(opts.stride).collect();
    let rows: Vec<Vec<Complex64>> = grid
        .scales()
        .par_iter()
        .map(|&a| {
            let kernel = reflected_kernel(a, n, len, opts, dt);
            scale_row(&spectrum, kernel, &forward, &inverse, &cols)
        })
        .collect();

    Ok(CwtCoefficients {
        values: rows.into_iter().flatten().collect(),
        num_cols: cols.len(),
        scales: grid.clone(),
        fs: s.fs,
        stride: opts.stride,
    })
}

/// `k[m mod len] = norm(a) * dt * conj(psi(-m / a))`, periodized for the circular case.
fn reflected_kernel(a: f64, n: usize, len: usize, opts: &CwtOptions, dt: f64) -> Vec<Complex64> {
    let c = opts.norm.factor(a) * dt;
    let reach = ((SUPPORT_WIDTHS * a).ceil() as usize).max(1);
    let mut kernel = vec![Complex64::new(0.0, 0.0); len];
    match opts.boundary {
        Boundary::ZeroExtend => {
            let max_m = reach.min(n - 1) as i64;
            for m in -max_m..=max_m {
                let idx = m.rem_euclid(len as i64) as usize;
                kernel[idx] = opts.wavelet.eval(-m as f64 / a).conj() * c;
            }
        }
        Boundary::Circular => {
            let max_m = reach as i64 + n as i64;
            for m in -max_m..=max_m {
                let idx = m.rem_euclid(len as i64) as usize;
                kernel[idx] += opts.wavelet.eval(-m as f64 / a).conj() * c;
            }
        }
    }
    kernel
}

fn scale_row(
    spectrum: &[Complex64],
    mut kernel: Vec<Complex64>,
    forward: &Arc<dyn Fft<f64>>,
    inverse: &Arc<dyn Fft<f64>>,
    cols: &[usize],
) -> Vec<Complex64> {
    let len = spectrum.len();
    forward.process(&mut kernel);
    for (k, x) in kernel.iter_mut().zip(spectrum) {
        *k *= x;
    }
    inverse.process(&mut kernel);
    let inv_len = 1.0 / len as f64;
    cols.iter().map(|&b| kernel[b] * inv_len).collect()
}

/// Element-wise `|C(a, b)|`, row-major with the same shape as the coefficients.
pub fn magnitude(c: &CwtCoefficients) -> Vec<f64> {
    c.values.iter().map(|z| z.norm()).collect()
}
